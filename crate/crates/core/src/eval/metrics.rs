use std::fmt::{self, Write as _};

use crate::data::{ClassLabel, NUM_CLASSES};
use crate::error::{precondition, Result};

/// Counts indexed `[truth][prediction]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return precondition("confusion_matrix", "truth and prediction lengths differ");
        }
        let mut m = Self::default();
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= NUM_CLASSES || p >= NUM_CLASSES {
                return precondition(
                    "confusion_matrix",
                    format!("class index out of range ({t}, {p})"),
                );
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    fn predicted(&self, c: usize) -> u64 {
        (0..NUM_CLASSES).map(|t| self.counts[t][c]).sum()
    }

    fn actual(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// `TP/(TP+FP)`; `None` when the class was never predicted.
    pub fn precision(&self, c: usize) -> Option<f64> {
        let p = self.predicted(c);
        (p > 0).then(|| self.counts[c][c] as f64 / p as f64)
    }

    /// `TP/(TP+FN)`; `None` when the class never occurs in the truth.
    pub fn recall(&self, c: usize) -> Option<f64> {
        let a = self.actual(c);
        (a > 0).then(|| self.counts[c][c] as f64 / a as f64)
    }

    /// Per-class table: class, recall %, precision %, support.
    pub fn to_table(&self) -> String {
        let pct =
            |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}", 100.0 * v));
        let mut s = format!(
            "{:<10} {:>9} {:>10} {:>8}\n",
            "class", "recall", "precision", "support"
        );
        for c in ClassLabel::ALL {
            let i = c.index();
            let _ = writeln!(
                s,
                "{:<10} {:>9} {:>10} {:>8}",
                c.name(),
                pct(self.recall(i)),
                pct(self.precision(i)),
                self.actual(i)
            );
        }
        let _ = writeln!(
            s,
            "accuracy {:.2}% ({}/{})",
            100.0 * self.accuracy(),
            self.correct(),
            self.total()
        );
        s
    }

    /// `class,recall,precision,support` with empty cells for undefined values.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
        let mut s = String::from("class,recall,precision,support\n");
        for c in ClassLabel::ALL {
            let i = c.index();
            let _ = writeln!(
                s,
                "{},{},{},{}",
                c.name(),
                cell(self.recall(i)),
                cell(self.precision(i)),
                self.actual(i)
            );
        }
        s
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<10}", "truth\\pred")?;
        for c in ClassLabel::ALL {
            write!(f, " {:>8}", c.name())?;
        }
        writeln!(f)?;
        for t in ClassLabel::ALL {
            write!(f, "{:<10}", t.name())?;
            for p in 0..NUM_CLASSES {
                write!(f, " {:>8}", self.counts[t.index()][p])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor() {
        let t = [0, 1, 2, 3, 3, 2];
        let m = ConfusionMatrix::from_pairs(&t, &t).unwrap();
        assert_eq!(m.accuracy(), 1.0);
        for c in 0..4 {
            assert_eq!(m.precision(c), Some(1.0));
            assert_eq!(m.recall(c), Some(1.0));
        }
    }

    #[test]
    fn constant_normal_predictor_on_balanced_set() {
        let t = [0, 1, 2, 3, 0, 1, 2, 3];
        let m = ConfusionMatrix::from_pairs(&t, &[3; 8]).unwrap();
        assert_eq!(m.recall(3), Some(1.0));
        assert_eq!(m.precision(3), Some(0.25));
        assert_eq!(m.precision(0), None);
        assert_eq!(m.recall(0), Some(0.0));
        assert!(m.to_table().contains("n/a"));
    }

    #[test]
    fn absent_class_is_undefined_not_zero() {
        let m = ConfusionMatrix::from_pairs(&[1, 2], &[1, 2]).unwrap();
        assert_eq!(m.precision(0), None);
        assert_eq!(m.recall(0), None);
        assert!(m.to_csv().contains("invalid,,,0"));
    }
}
