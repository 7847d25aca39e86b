use std::fmt;

use crate::error::{Error, Result};

/// Names of the built-in configurations.
pub const PRESETS: [&str; 4] = ["tiny", "mv1", "mv2", "mv3"];

/// The MvANet-X configuration tuple plus input geometry and ablation switch.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchHyperParams {
    /// Preset label carried into weights files; `custom` when hand-built.
    pub name: String,
    /// Channel budgets: `k[0]` after the stem, `k[1..=3]` added per visual layer.
    pub k: [usize; 4],
    /// Stem attention scaling factor.
    pub a1: f64,
    /// Final attention scaling factor.
    pub a2: f64,
    /// Channel compression factor of the visual receptors.
    pub t: f64,
    /// Ocular number: parallel receptors per visual layer.
    pub p: usize,
    pub num_classes: usize,
    /// `(height, width)` of the network input.
    pub input_hw: (usize, usize),
    /// `false` removes the squeeze-and-excitation gates (MvTNet).
    pub attention: bool,
}

impl ArchHyperParams {
    pub fn preset(name: &str) -> Result<Self> {
        let (k, a1, a2, t, p) = match name {
            "tiny" => ([84, 18, 24, 30], 1.0, 0.8, 1.7, 1),
            "mv1" => ([84, 96, 138, 192], 0.7, 0.6, 1.5, 1),
            "mv2" => ([84, 96, 138, 192], 0.7, 0.6, 1.5, 2),
            "mv3" => ([84, 96, 138, 192], 0.7, 0.6, 1.5, 3),
            other => {
                return Err(Error::HyperParam {
                    field: "arch",
                    msg: format!("unknown preset `{other}` (expected one of {PRESETS:?})"),
                })
            }
        };
        Ok(Self {
            name: name.to_string(),
            k,
            a1,
            a2,
            t,
            p,
            num_classes: 4,
            input_hw: (32, 32),
            attention: true,
        })
    }

    pub fn with_input(mut self, size: usize) -> Self {
        self.input_hw = (size, size);
        self
    }

    pub fn without_attention(mut self) -> Self {
        self.attention = false;
        self
    }

    /// Applies a `key=value` override such as `k3=32` or `t=1.6`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let Some((key, value)) = spec.split_once('=') else {
            return Err(Error::HyperParam {
                field: "override",
                msg: format!("`{spec}` is not key=value"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let int = |field: &'static str| -> Result<usize> {
            value.parse().map_err(|_| Error::HyperParam {
                field,
                msg: format!("`{value}` is not a positive integer"),
            })
        };
        let real = |field: &'static str| -> Result<f64> {
            value.parse().map_err(|_| Error::HyperParam {
                field,
                msg: format!("`{value}` is not a number"),
            })
        };
        match key {
            "k0" => self.k[0] = int("k0")?,
            "k1" => self.k[1] = int("k1")?,
            "k2" => self.k[2] = int("k2")?,
            "k3" => self.k[3] = int("k3")?,
            "a1" => self.a1 = real("a1")?,
            "a2" => self.a2 = real("a2")?,
            "t" => self.t = real("t")?,
            "p" => self.p = int("p")?,
            "classes" | "num_classes" => self.num_classes = int("num_classes")?,
            other => {
                return Err(Error::HyperParam {
                    field: "override",
                    msg: format!("unknown key `{other}` (k0..k3, a1, a2, t, p, classes)"),
                })
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, msg: String| Err(Error::HyperParam { field, msg });
        if self.p == 0 {
            return bad("p", "ocular number must be >= 1".into());
        }
        const K_FIELDS: [&str; 4] = ["k0", "k1", "k2", "k3"];
        for (i, &k) in self.k.iter().enumerate() {
            if k == 0 {
                return bad(K_FIELDS[i], "must be >= 1".into());
            }
            if k % self.p != 0 {
                return bad(K_FIELDS[i], format!("{k} is not divisible by p={}", self.p));
            }
        }
        for (field, a) in [("a1", self.a1), ("a2", self.a2)] {
            if !(a > 0.0 && a <= 1.0) {
                return bad(field, format!("{a} is outside (0, 1]"));
            }
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad("t", format!("{} must be a positive real", self.t));
        }
        if self.num_classes == 0 {
            return bad("num_classes", "must be >= 1".into());
        }
        let (h, w) = self.input_hw;
        if h < 4 || w < 4 || h % 4 != 0 || w % 4 != 0 {
            return bad(
                "input_hw",
                format!("{h}x{w} must be positive multiples of 4"),
            );
        }
        if super::plan::floor_width(self.k[0] as f64 / (self.a1 * self.p as f64)) == 0 {
            return bad("a1", format!("k0/(a1·p) floors to 0 for k0={}", self.k[0]));
        }
        Ok(())
    }

    /// Display name, e.g. `MvANet-1-tiny` or `MvTNet-1`.
    pub fn display_name(&self) -> String {
        let family = if self.attention { "MvANet" } else { "MvTNet" };
        match self.name.as_str() {
            "tiny" => format!("{family}-1-tiny"),
            "mv1" | "mv2" | "mv3" => format!("{family}-{}", &self.name[2..]),
            _ => format!("{family}-custom(p={})", self.p),
        }
    }
}

impl fmt::Display for ArchHyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} k=[{}, {}, {}, {}] a1={} a2={} t={} p={} classes={} input={}x{} attention={}",
            self.display_name(),
            self.k[0],
            self.k[1],
            self.k[2],
            self.k[3],
            self.a1,
            self.a2,
            self.t,
            self.p,
            self.num_classes,
            self.input_hw.0,
            self.input_hw.1,
            self.attention
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            ArchHyperParams::preset(name).unwrap().validate().unwrap();
        }
        assert!(ArchHyperParams::preset("mv4").is_err());
    }

    #[test]
    fn overrides() {
        let mut hp = ArchHyperParams::preset("tiny").unwrap();
        hp.apply_override("k3=32").unwrap();
        assert_eq!(hp.k[3], 32);
        assert!(hp.apply_override("k9=1").is_err());
        assert!(hp.apply_override("k3").is_err());
        assert!(hp.apply_override("k3=abc").is_err());
        let mut hp3 = ArchHyperParams::preset("mv3").unwrap();
        let err = hp3.apply_override("k1=97").unwrap_err().to_string();
        assert!(err.contains("k1"), "{err}");
    }

    #[test]
    fn invalid_fields_are_named() {
        let mut hp = ArchHyperParams::preset("tiny").unwrap();
        hp.input_hw = (30, 32);
        assert!(hp.validate().unwrap_err().to_string().contains("input_hw"));
        let mut hp = ArchHyperParams::preset("tiny").unwrap();
        hp.a2 = 1.5;
        assert!(hp.validate().unwrap_err().to_string().contains("a2"));
    }

    #[test]
    fn display_names() {
        let tiny = ArchHyperParams::preset("tiny").unwrap();
        assert_eq!(tiny.display_name(), "MvANet-1-tiny");
        assert_eq!(tiny.without_attention().display_name(), "MvTNet-1-tiny");
        assert_eq!(
            ArchHyperParams::preset("mv3").unwrap().display_name(),
            "MvANet-3"
        );
    }
}
