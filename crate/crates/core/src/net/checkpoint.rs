//! Checkpoint directory: one `.tns` per parameter tensor, optional Adam
//! moments as `adam.m.<name>.tns` / `adam.v.<name>.tns`, and `index.txt`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{self, read_tensor, write_tensor};

use super::{AdamState, ModelParams, Weights};

const INDEX: &str = "index.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub adam: Option<AdamState>,
}

pub fn save_checkpoint(dir: &Path, params: &ModelParams<f32>, adam: Option<&AdamState>) -> Result<()> {
    io::create_dir_all(dir)?;
    let mut index = String::new();
    writeln!(index, "dropout = {}", params.dropout).unwrap();
    writeln!(index, "fingerprint = {}", params.fingerprint()).unwrap();
    if let Some(state) = adam {
        writeln!(index, "adam_step = {}", state.t).unwrap();
    }
    for (name, dims, data) in params.weights.tensors() {
        write_tensor(&dir.join(format!("{name}.tns")), &dims, data)?;
        let dims_text: Vec<String> = dims.iter().map(usize::to_string).collect();
        writeln!(index, "tensor {name} {}", dims_text.join("x")).unwrap();
    }
    if let Some(state) = adam {
        for (prefix, moments) in [("adam.m", &state.m), ("adam.v", &state.v)] {
            for (name, dims, data) in moments.tensors() {
                write_tensor(&dir.join(format!("{prefix}.{name}.tns")), &dims, data)?;
            }
        }
    }
    io::write_bytes(&dir.join(INDEX), index.as_bytes())
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let index_path = dir.join(INDEX);
    if !index_path.exists() {
        return Err(Error::Missing(index_path));
    }
    let index = io::read_text(&index_path)?;
    let mut dropout = None;
    let mut adam_step = None;
    for line in index.lines() {
        if let Some((key, value)) = line.split_once('=') {
            let value = value.trim();
            match key.trim() {
                "dropout" => dropout = value.parse::<f32>().ok(),
                "adam_step" => adam_step = value.parse::<u64>().ok(),
                _ => {}
            }
        }
    }
    let dropout = dropout.ok_or_else(|| Error::format(&index_path, "missing dropout entry"))?;

    let read_into = |weights: &mut Weights<f32>, prefix: &str| -> Result<()> {
        let names: Vec<(String, Vec<usize>)> = weights
            .tensors()
            .into_iter()
            .map(|(n, d, _)| (n, d))
            .collect();
        for ((name, dims), slot) in names.into_iter().zip(weights.slices_mut()) {
            let path = dir.join(format!("{prefix}{name}.tns"));
            if !path.exists() {
                return Err(Error::Missing(path));
            }
            let (got, data) = read_tensor(&path)?;
            if got != dims {
                return Err(Error::format(&path, format!("dims {got:?}, expected {dims:?}")));
            }
            slot.copy_from_slice(&data);
        }
        Ok(())
    };

    let mut weights = Weights::zeros();
    read_into(&mut weights, "")?;
    let params = ModelParams { weights, dropout };
    if !params.weights.is_finite() {
        return Err(Error::NonFinite(format!("parameters in {}", dir.display())));
    }
    let adam = match adam_step {
        Some(t) => {
            let mut state = AdamState {
                t,
                ..AdamState::default()
            };
            read_into(&mut state.m, "adam.m.")?;
            read_into(&mut state.v, "adam.v.")?;
            Some(state)
        }
        None => None,
    };
    Ok(Checkpoint { params, adam })
}
