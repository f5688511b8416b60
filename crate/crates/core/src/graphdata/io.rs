//! Dataset container.
//!
//! A dataset is a little-endian binary file plus a JSON sidecar next to it
//! (same stem, `.json` extension). Binary layout:
//!
//! ```text
//! magic      b"FGSD"
//! version    u32
//! N, D, T    u32 ×3
//! count      u64
//! count × { label u8, features N·D f64 (row-major), connectivity T·N·N f64 }
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DynamicBrainGraph;
use crate::error::{Error, Result};
use crate::numcore::Tensor2;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"FGSD";
const PREAMBLE_LEN: usize = 4 + 4 + 12 + 8;

/// The JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub n_regions: usize,
    pub feature_dim: usize,
    pub timesteps: usize,
    pub sample_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_regions: Option<Vec<usize>>,
    /// Generator settings, when the dataset is synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

impl DatasetHeader {
    pub fn describe(graphs: &[DynamicBrainGraph]) -> Self {
        let first = graphs.first();
        Self {
            format_version: FORMAT_VERSION,
            n_regions: first.map_or(0, |g| g.n_regions()),
            feature_dim: first.map_or(0, |g| g.feature_dim()),
            timesteps: first.map_or(0, |g| g.timesteps()),
            sample_count: graphs.len(),
            region_names: None,
            planted_regions: None,
            generator: None,
        }
    }

    pub fn region_name(&self, i: usize) -> String {
        self.region_names
            .as_ref()
            .and_then(|names| names.get(i).cloned())
            .unwrap_or_else(|| format!("region_{i}"))
    }
}

/// `data.bin` → `data.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_dataset(
    path: &Path,
    graphs: &[DynamicBrainGraph],
    header: &DatasetHeader,
) -> Result<()> {
    if path.extension().is_some_and(|e| e == "json") {
        return Err(Error::InvalidArgument(format!(
            "{} would collide with its JSON sidecar",
            path.display()
        )));
    }
    DynamicBrainGraph::validate_dataset(graphs)?;
    let described = DatasetHeader::describe(graphs);
    let header = DatasetHeader {
        format_version: FORMAT_VERSION,
        n_regions: described.n_regions,
        feature_dim: described.feature_dim,
        timesteps: described.timesteps,
        sample_count: described.sample_count,
        ..header.clone()
    };
    if let Some(names) = &header.region_names {
        if names.len() != header.n_regions {
            return Err(Error::Shape(format!(
                "{} region names for {} regions",
                names.len(),
                header.n_regions
            )));
        }
    }

    let (n, d, t) = (header.n_regions, header.feature_dim, header.timesteps);
    let mut buf = Vec::with_capacity(PREAMBLE_LEN + graphs.len() * (1 + 8 * (n * d + t * n * n)));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for dim in [n, d, t] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(graphs.len() as u64).to_le_bytes());
    for g in graphs {
        buf.push(g.label);
        for v in g.node_features.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for a in &g.connectivity {
            for v in a.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

/// A loaded dataset: sidecar header plus validated samples.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub graphs: Vec<DynamicBrainGraph>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Corrupt {
                path: self.path.to_path_buf(),
                detail: format!("truncated at byte {}", self.pos),
            });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.take(count * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let corrupt = |detail: String| Error::Corrupt {
        path: path.to_path_buf(),
        detail,
    };
    let header: DatasetHeader = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)
        .map_err(|e| corrupt(format!("sidecar: {e}")))?;
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };

    if r.take(4)? != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION || header.format_version != FORMAT_VERSION {
        return Err(corrupt(format!(
            "unsupported format version {version} (sidecar {})",
            header.format_version
        )));
    }
    let (n, d, t) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let count = r.u64()? as usize;
    if (n, d, t, count)
        != (
            header.n_regions,
            header.feature_dim,
            header.timesteps,
            header.sample_count,
        )
    {
        return Err(Error::Shape(format!(
            "binary header (N={n}, D={d}, T={t}, samples={count}) disagrees with sidecar \
             (N={}, D={}, T={}, samples={})",
            header.n_regions, header.feature_dim, header.timesteps, header.sample_count
        )));
    }
    let record = 1 + 8 * (n * d + t * n * n);
    if bytes.len() != PREAMBLE_LEN + count * record {
        return Err(corrupt(format!(
            "{} bytes, expected {} for {count} samples",
            bytes.len(),
            PREAMBLE_LEN + count * record
        )));
    }

    let mut graphs = Vec::with_capacity(count);
    for index in 0..count {
        let label = r.take(1)?[0];
        if label > 1 {
            return Err(Error::InvalidLabel { index, label });
        }
        let node_features = Tensor2::from_vec(n, d, r.f64s(n * d)?)?;
        let connectivity = (0..t)
            .map(|_| Tensor2::from_vec(n, n, r.f64s(n * n)?))
            .collect::<Result<Vec<_>>>()?;
        let g = DynamicBrainGraph {
            node_features,
            connectivity,
            label,
        };
        g.validate(index)?;
        graphs.push(g);
    }
    Ok(Dataset { header, graphs })
}

/// Flat CSV of node features: `sample,label,region,f0..f{D-1}`.
pub fn export_features_csv(path: &Path, graphs: &[DynamicBrainGraph]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = graphs.first().map_or(0, |g| g.feature_dim());
    let mut head = vec!["sample".to_string(), "label".into(), "region".into()];
    head.extend((0..d).map(|k| format!("f{k}")));
    w.write_record(&head)?;
    for (s, g) in graphs.iter().enumerate() {
        for i in 0..g.n_regions() {
            let mut rec = vec![s.to_string(), g.label.to_string(), i.to_string()];
            rec.extend(g.node_features.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
