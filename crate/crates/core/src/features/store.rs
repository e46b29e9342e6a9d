use std::path::{Path, PathBuf};

use crate::container::{Blob, Container};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::tensor::FeatureMatrix;

/// A feature matrix for one extraction method plus the sample id of every
/// row. On disk: a container with one blob named after the method, shape
/// `[n, dim]`, and a sidecar `<file>.index` with `row<TAB>id` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStore {
    pub method: String,
    pub ids: Vec<String>,
    pub matrix: FeatureMatrix,
}

impl FeatureStore {
    pub fn new(method: impl Into<String>, ids: Vec<String>, matrix: FeatureMatrix) -> Result<Self> {
        if ids.len() != matrix.rows() {
            return Err(Error::shape(format!(
                "{} ids for {} feature rows",
                ids.len(),
                matrix.rows()
            )));
        }
        Ok(FeatureStore {
            method: method.into(),
            ids,
            matrix,
        })
    }

    pub fn index_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".index");
        PathBuf::from(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut c = Container::new();
        c.insert(
            self.method.clone(),
            Blob::new(
                vec![self.matrix.rows() as u32, self.matrix.cols() as u32],
                self.matrix.data().to_vec(),
            )?,
        )?;
        let mut index = String::new();
        for (i, id) in self.ids.iter().enumerate() {
            index.push_str(&format!("{i}\t{id}\n"));
        }
        write_atomic(&Self::index_path(path), index.as_bytes())?;
        c.write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let source = path.display().to_string();
        let c = Container::read(path)?;
        let mut blobs = c.iter();
        let (method, blob) = match (blobs.next(), blobs.next()) {
            (Some(b), None) => b,
            _ => {
                return Err(Error::format(
                    source,
                    "header",
                    format!("feature store must hold exactly one blob, found {}", c.len()),
                ))
            }
        };
        let [rows, cols] = blob.dims_usize()[..] else {
            return Err(Error::format(source, format!("blob {method:?}"), "expected shape [n, dim]"));
        };
        let matrix = FeatureMatrix::new(rows, cols, blob.data.clone())?;

        let index_path = Self::index_path(path);
        let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index_source = index_path.display().to_string();
        let mut ids = Vec::with_capacity(rows);
        for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let err = |m: &str| Error::format(&index_source, format!("line {}", lineno + 1), m);
            let (row, id) = line.split_once('\t').ok_or_else(|| err("expected row<TAB>id"))?;
            if row.parse::<usize>().ok() != Some(ids.len()) {
                return Err(err("rows must be numbered consecutively from 0"));
            }
            ids.push(id.to_string());
        }
        if ids.len() != rows {
            return Err(Error::format(
                index_source,
                "end of file",
                format!("{} ids for {rows} feature rows", ids.len()),
            ));
        }
        Ok(FeatureStore {
            method: method.to_string(),
            ids,
            matrix,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fc7.sntw");
        let m = FeatureMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let s = FeatureStore::new("fc7", vec!["a".into(), "b".into()], m).unwrap();
        s.save(&p).unwrap();
        assert_eq!(FeatureStore::load(&p).unwrap(), s);

        let e = FeatureStore::new("fc7", vec![], FeatureMatrix::new(0, 4096, vec![]).unwrap()).unwrap();
        e.save(&p).unwrap();
        let back = FeatureStore::load(&p).unwrap();
        assert_eq!((back.matrix.rows(), back.matrix.cols()), (0, 4096));
    }

    #[test]
    fn index_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.sntw");
        let m = FeatureMatrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        FeatureStore::new("x", vec!["a".into(), "b".into()], m).unwrap().save(&p).unwrap();
        std::fs::write(FeatureStore::index_path(&p), "0\ta\n").unwrap();
        assert!(FeatureStore::load(&p).is_err());
    }
}
