use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_range;

use super::image_io::{read_rgb, resize_bilinear};
use super::{ClassLabel, Dataset, Sample, FRAMES_PER_JUJUBE};

/// One manifest line; `path` is relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub label: String,
    pub jujube_id: Option<u64>,
    pub frame_index: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub path: PathBuf,
    pub rows: Vec<(ManifestRow, ClassLabel)>,
}

impl Manifest {
    /// Parses and validates a `path,label,jujube_id,frame_index` CSV file.
    /// Row numbers in errors count data rows from 1.
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        if header != ["path", "label", "jujube_id", "frame_index"] {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                row: 0,
                msg: format!(
                    "header must be path,label,jujube_id,frame_index, found {}",
                    header.join(",")
                ),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<ManifestRow>().enumerate() {
            let bad = |msg: String| Error::Manifest {
                path: path.to_path_buf(),
                row: i + 1,
                msg,
            };
            let row = rec.map_err(|e| bad(e.to_string()))?;
            let label = row
                .label
                .parse::<ClassLabel>()
                .map_err(|e| bad(e.to_string()))?;
            if row
                .frame_index
                .is_some_and(|f| f as usize >= FRAMES_PER_JUJUBE)
            {
                return Err(bad(format!(
                    "frame_index must be below {FRAMES_PER_JUJUBE}"
                )));
            }
            rows.push((row, label));
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    pub fn write(path: &Path, rows: &[ManifestRow]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    /// Decodes every image and bilinearly resizes it to `target_hw`. Pixel
    /// values stay in [0, 255]; see [`NormStats`](super::NormStats).
    pub fn load(&self, target_hw: (usize, usize)) -> Result<Dataset> {
        let base = self.base_dir();
        let loaded = map_range(self.rows.len(), |i| {
            let (row, label) = &self.rows[i];
            let file = base.join(&row.path);
            if !file.is_file() {
                return Err(Error::Manifest {
                    path: self.path.clone(),
                    row: i + 1,
                    msg: format!("missing image file {}", file.display()),
                });
            }
            let img = read_rgb(&file).map_err(|e| Error::Manifest {
                path: self.path.clone(),
                row: i + 1,
                msg: e.to_string(),
            })?;
            Ok(Sample {
                image: resize_bilinear(&img, target_hw.0, target_hw.1)?,
                label: *label,
                jujube_id: row.jujube_id,
                frame_index: row.frame_index,
            })
        });
        Ok(Dataset::new(loaded.into_iter().collect::<Result<_>>()?))
    }
}

/// Reads the manifest at `path` and loads its images at `target_hw`.
pub fn load_dataset(path: &Path, target_hw: (usize, usize)) -> Result<Dataset> {
    Manifest::read(path)?.load(target_hw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("m.csv");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn errors_name_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "path,label,jujube_id,frame_index\na.ppm,normal,0,0\nb.ppm,moldy,0,1\n",
        );
        let err = Manifest::read(&p).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("moldy"), "{err}");

        let p = write(
            dir.path(),
            "path,label,jujube_id,frame_index\na.ppm,normal,x,0\n",
        );
        assert!(Manifest::read(&p)
            .unwrap_err()
            .to_string()
            .contains("row 1"));

        let p = write(
            dir.path(),
            "path,label,jujube_id,frame_index\na.ppm,normal,0,7\n",
        );
        assert!(Manifest::read(&p)
            .unwrap_err()
            .to_string()
            .contains("row 1"));
    }

    #[test]
    fn missing_image_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "path,label,jujube_id,frame_index\nnope.ppm,rotten,,\n",
        );
        let m = Manifest::read(&p).unwrap();
        assert_eq!(m.rows[0].0.jujube_id, None);
        let err = m.load((4, 4)).unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("missing"), "{err}");
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "file,label\na.ppm,normal\n");
        assert!(Manifest::read(&p).is_err());
    }
}
