//! Binary model container with a JSON sidecar describing its contents.
//!
//! Layout (little-endian): magic, format version, algorithm tag, seed,
//! item count, length-prefixed hyperparameter JSON, block count, then
//! named typed blocks each carrying its shape and raw values.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    AlsModel, Algorithm, BprModel, Factors, Hyperparameters, ItemKnnModel, Model, Params, PopularityModel,
    RecommenderError, SlimModel,
};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"POPBIAS\0";

#[derive(Debug, Clone, PartialEq)]
enum Data {
    U32(Vec<u32>),
    U64(Vec<u64>),
    F64(Vec<f64>),
}

impl Data {
    fn tag(&self) -> u8 {
        match self {
            Data::U32(_) => 0,
            Data::U64(_) => 1,
            Data::F64(_) => 2,
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            Data::U32(_) => "u32",
            Data::U64(_) => "u64",
            Data::F64(_) => "f64",
        }
    }

    fn len(&self) -> usize {
        match self {
            Data::U32(v) => v.len(),
            Data::U64(v) => v.len(),
            Data::F64(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    name: String,
    rows: u64,
    cols: u64,
    data: Data,
}

#[derive(Serialize)]
struct BlockInfo<'a> {
    name: &'a str,
    dtype: &'static str,
    rows: u64,
    cols: u64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    format_version: u32,
    algorithm: Algorithm,
    seed: u64,
    n_items: usize,
    hyperparameters: &'a Hyperparameters,
    blocks: Vec<BlockInfo<'a>>,
}

fn sparse_blocks(rows: &[Vec<(u32, f64)>]) -> Vec<Block> {
    let mut ptr = Vec::with_capacity(rows.len() + 1);
    let mut idx = Vec::new();
    let mut val = Vec::new();
    ptr.push(0u64);
    for row in rows {
        for &(j, w) in row {
            idx.push(j);
            val.push(w);
        }
        ptr.push(idx.len() as u64);
    }
    let nnz = idx.len() as u64;
    vec![
        Block { name: "row_ptr".into(), rows: ptr.len() as u64, cols: 1, data: Data::U64(ptr) },
        Block { name: "col_idx".into(), rows: nnz, cols: 1, data: Data::U32(idx) },
        Block { name: "values".into(), rows: nnz, cols: 1, data: Data::F64(val) },
    ]
}

fn factor_block(name: &str, f: &Factors) -> Block {
    Block { name: name.into(), rows: f.rows() as u64, cols: f.dim() as u64, data: Data::F64(f.data().to_vec()) }
}

fn blocks_of(model: &Model) -> Vec<Block> {
    let mut blocks = vec![Block {
        name: "item_support".into(),
        rows: model.n_items as u64,
        cols: 1,
        data: Data::U32(model.item_support.clone()),
    }];
    match &model.params {
        Params::Random | Params::Popularity(_) => {}
        Params::ItemKnn(m) => blocks.extend(sparse_blocks(&m.neighbors)),
        Params::Slim(m) => blocks.extend(sparse_blocks(&m.weights)),
        Params::Als(m) => {
            blocks.push(factor_block("user_factors", m.user_factors()));
            blocks.push(factor_block("item_factors", m.item_factors()));
        }
        Params::Bpr(m) => {
            blocks.push(factor_block("user_factors", m.user_factors()));
            blocks.push(factor_block("item_factors", m.item_factors()));
        }
    }
    blocks
}

/// Serializes a model to the binary container format.
pub fn to_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(model.algorithm.tag());
    out.extend_from_slice(&model.seed.to_le_bytes());
    out.extend_from_slice(&(model.n_items as u64).to_le_bytes());
    let hp = serde_json::to_vec(&model.hyperparameters).expect("hyperparameters serialize");
    out.extend_from_slice(&(hp.len() as u32).to_le_bytes());
    out.extend_from_slice(&hp);
    let blocks = blocks_of(model);
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for b in &blocks {
        out.push(b.name.len() as u8);
        out.extend_from_slice(b.name.as_bytes());
        out.push(b.data.tag());
        out.extend_from_slice(&b.rows.to_le_bytes());
        out.extend_from_slice(&b.cols.to_le_bytes());
        match &b.data {
            Data::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Data::U64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Data::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RecommenderError> {
        if self.bytes.len() < n {
            return Err(RecommenderError::Format("truncated file".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, RecommenderError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, RecommenderError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, RecommenderError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn values<T, const N: usize>(&mut self, count: usize, f: fn([u8; N]) -> T) -> Result<Vec<T>, RecommenderError> {
        let len = count.checked_mul(N).ok_or_else(|| RecommenderError::Format("block too large".into()))?;
        let raw = self.take(len)?;
        Ok(raw.chunks_exact(N).map(|c| f(c.try_into().unwrap())).collect())
    }
}

fn take_block(blocks: &mut Vec<Block>, name: &str) -> Result<Block, RecommenderError> {
    let pos = blocks
        .iter()
        .position(|b| b.name == name)
        .ok_or_else(|| RecommenderError::Format(format!("missing block {name:?}")))?;
    Ok(blocks.remove(pos))
}

fn sparse_from_blocks(blocks: &mut Vec<Block>, n_items: usize) -> Result<Vec<Vec<(u32, f64)>>, RecommenderError> {
    let bad = |what: &str| RecommenderError::Format(format!("inconsistent sparse weights: {what}"));
    let (Data::U64(ptr), Data::U32(idx), Data::F64(val)) = (
        take_block(blocks, "row_ptr")?.data,
        take_block(blocks, "col_idx")?.data,
        take_block(blocks, "values")?.data,
    ) else {
        return Err(bad("wrong block types"));
    };
    if ptr.len() != n_items + 1 || idx.len() != val.len() || ptr.last() != Some(&(idx.len() as u64)) {
        return Err(bad("lengths"));
    }
    let mut rows = Vec::with_capacity(n_items);
    for w in ptr.windows(2) {
        let (a, b) = (w[0] as usize, w[1] as usize);
        if a > b || b > idx.len() {
            return Err(bad("row pointers"));
        }
        let row: Vec<(u32, f64)> = idx[a..b].iter().copied().zip(val[a..b].iter().copied()).collect();
        if row.iter().any(|&(j, _)| j as usize >= n_items) {
            return Err(bad("item index out of range"));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn factors_from_block(blocks: &mut Vec<Block>, name: &str) -> Result<Factors, RecommenderError> {
    let b = take_block(blocks, name)?;
    match b.data {
        Data::F64(v) => Ok(Factors::from_data(b.rows as usize, b.cols as usize, v)),
        _ => Err(RecommenderError::Format(format!("block {name:?} is not f64"))),
    }
}

/// Parses the binary container format.
pub fn from_bytes(bytes: &[u8]) -> Result<Model, RecommenderError> {
    let mut c = Cursor { bytes };
    if c.take(8)? != MAGIC {
        return Err(RecommenderError::Format("not a model file".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(RecommenderError::Format(format!("unsupported format version {version}")));
    }
    let algorithm =
        Algorithm::from_tag(c.u8()?).ok_or_else(|| RecommenderError::Format("unknown algorithm tag".into()))?;
    let seed = c.u64()?;
    let n_items = c.u64()? as usize;
    let hp_len = c.u32()? as usize;
    let hyperparameters: Hyperparameters = serde_json::from_slice(c.take(hp_len)?)
        .map_err(|e| RecommenderError::Format(format!("hyperparameters: {e}")))?;
    let n_blocks = c.u32()?;
    let mut blocks = Vec::with_capacity(n_blocks as usize);
    for _ in 0..n_blocks {
        let name_len = c.u8()? as usize;
        let name = String::from_utf8(c.take(name_len)?.to_vec())
            .map_err(|_| RecommenderError::Format("block name is not UTF-8".into()))?;
        let tag = c.u8()?;
        let rows = c.u64()?;
        let cols = c.u64()?;
        let count = rows
            .checked_mul(cols)
            .and_then(|n| usize::try_from(n).ok())
            .ok_or_else(|| RecommenderError::Format(format!("block {name:?} too large")))?;
        let data = match tag {
            0 => Data::U32(c.values(count, u32::from_le_bytes)?),
            1 => Data::U64(c.values(count, u64::from_le_bytes)?),
            2 => Data::F64(c.values(count, f64::from_le_bytes)?),
            t => return Err(RecommenderError::Format(format!("block {name:?} has unknown type {t}"))),
        };
        blocks.push(Block { name, rows, cols, data });
    }
    if !c.bytes.is_empty() {
        return Err(RecommenderError::Format("trailing bytes".into()));
    }

    let item_support = match take_block(&mut blocks, "item_support")?.data {
        Data::U32(v) if v.len() == n_items => v,
        _ => return Err(RecommenderError::Format("bad item_support block".into())),
    };
    let factor_check = |f: &Factors, rows: Option<usize>| {
        let ok = f.rows() == rows.unwrap_or(f.rows()) && f.dim() > 0;
        ok.then_some(()).ok_or_else(|| RecommenderError::Format("factor shape mismatch".into()))
    };
    let params = match algorithm {
        Algorithm::Rand => Params::Random,
        Algorithm::Pop => Params::Popularity(PopularityModel::train(&item_support)),
        Algorithm::ItemKnn => Params::ItemKnn(ItemKnnModel { neighbors: sparse_from_blocks(&mut blocks, n_items)? }),
        Algorithm::Slim => Params::Slim(SlimModel { weights: sparse_from_blocks(&mut blocks, n_items)? }),
        Algorithm::Als | Algorithm::Bpr => {
            let users = factors_from_block(&mut blocks, "user_factors")?;
            let items = factors_from_block(&mut blocks, "item_factors")?;
            factor_check(&items, Some(n_items))?;
            factor_check(&users, None)?;
            if users.dim() != items.dim() {
                return Err(RecommenderError::Format("factor dimensions differ".into()));
            }
            if algorithm == Algorithm::Als {
                let p = &hyperparameters.als;
                Params::Als(AlsModel::from_parts(users, items, p.alpha, p.regularization))
            } else {
                let p = &hyperparameters.bpr;
                Params::Bpr(BprModel::from_parts(users, items, p.fold_in_confidence, p.fold_in_regularization))
            }
        }
    };
    if let Some(extra) = blocks.first() {
        return Err(RecommenderError::Format(format!("unexpected block {:?}", extra.name)));
    }
    Ok(Model { algorithm, seed, hyperparameters, n_items, item_support, params })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    path.with_file_name(name)
}

/// Writes the model to `path` and a JSON description next to it.
pub fn save_model(model: &Model, path: &Path) -> Result<(), RecommenderError> {
    let mut file = fs::File::create(path)?;
    file.write_all(&to_bytes(model))?;
    let blocks = blocks_of(model);
    let sidecar = Sidecar {
        format_version: FORMAT_VERSION,
        algorithm: model.algorithm,
        seed: model.seed,
        n_items: model.n_items,
        hyperparameters: &model.hyperparameters,
        blocks: blocks
            .iter()
            .map(|b| BlockInfo { name: &b.name, dtype: b.data.type_name(), rows: b.rows, cols: b.cols })
            .collect(),
    };
    debug_assert!(blocks.iter().all(|b| b.data.len() as u64 == b.rows * b.cols));
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, RecommenderError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
