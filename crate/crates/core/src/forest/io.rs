//! JSON-lines forest files: one header line, then one line per tree holding
//! its bootstrap counts and node arrays.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BootstrapRecord, Fingerprint, Forest, ForestParams, Tree};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "rfgap-forest";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    params: ForestParams,
    fingerprint: Fingerprint,
    n_trees: usize,
}

#[derive(Serialize, Deserialize)]
struct TreeLine<T> {
    index: usize,
    bootstrap: BootstrapRecord,
    tree: Tree<T>,
}

impl<T: Real> Forest<T> {
    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        let header = Header {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            params: self.params.clone(),
            fingerprint: self.fingerprint.clone(),
            n_trees: self.trees.len(),
        };
        let io_err = |e| Error::io("<forest stream>", e);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io_err)?;
        for (index, (tree, bootstrap)) in self.trees.iter().zip(&self.bootstraps).enumerate() {
            let line = TreeLine {
                index,
                bootstrap: bootstrap.clone(),
                tree: tree.clone(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let io_err = |e| Error::io("<forest stream>", e);
        let first = lines
            .next()
            .ok_or_else(|| Error::data("empty forest file"))?
            .map_err(io_err)?;
        let header: Header = serde_json::from_str(&first)?;
        if header.format != FORMAT_NAME {
            return Err(Error::data(format!("not a forest file (format '{}')", header.format)));
        }
        if header.version != FORMAT_VERSION {
            return Err(Error::data(format!("unsupported forest file version {}", header.version)));
        }
        let mut trees = Vec::with_capacity(header.n_trees);
        let mut bootstraps = Vec::with_capacity(header.n_trees);
        for line in lines {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let t: TreeLine<T> = serde_json::from_str(&line)?;
            if t.index != trees.len() {
                return Err(Error::data(format!("tree line {} out of order", t.index)));
            }
            trees.push(t.tree);
            bootstraps.push(t.bootstrap);
        }
        if trees.len() != header.n_trees {
            return Err(Error::data(format!(
                "header announces {} trees, file holds {}",
                header.n_trees,
                trees.len()
            )));
        }
        Forest::from_parts(header.params, trees, bootstraps, header.fingerprint)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }
}
