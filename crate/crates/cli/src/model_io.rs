//! The JSON model format.
//!
//! A single network is `{"layer_dims": [...], "layers": [{"weight": [...],
//! "bias": [...]}, ...]}` with row-major flat weights; a trained triple is
//! the envelope `{"G": ..., "C1": ..., "C2": ...}`. Parsing is
//! order-insensitive; emission fixes the field order above and prints
//! reals with 17 significant digits so reload is bit-exact.

use std::path::Path;

use bcdm_core::matrix::Matrix;
use bcdm_core::tensor_net::{DenseLayer, Network};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    layer_dims: Vec<usize>,
    layers: Vec<LayerDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TripleDoc {
    #[serde(rename = "G")]
    g: NetworkDoc,
    #[serde(rename = "C1")]
    c1: NetworkDoc,
    #[serde(rename = "C2")]
    c2: NetworkDoc,
}

/// One real with 17 significant digits, bit-exact on reparse.
fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn emit_network(out: &mut String, net: &Network) {
    out.push_str("{\"layer_dims\": [");
    let dims: Vec<String> = net.layer_dims().iter().map(usize::to_string).collect();
    out.push_str(&dims.join(", "));
    out.push_str("], \"layers\": [");
    for (i, layer) in net.layers().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str("{\"weight\": [");
        let w: Vec<String> = layer.weight().data().iter().map(|v| fmt_real(*v)).collect();
        out.push_str(&w.join(", "));
        out.push_str("], \"bias\": [");
        let b: Vec<String> = layer.bias().iter().map(|v| fmt_real(*v)).collect();
        out.push_str(&b.join(", "));
        out.push_str("]}");
    }
    out.push_str("]}");
}

pub fn network_to_json(net: &Network) -> String {
    let mut out = String::new();
    emit_network(&mut out, net);
    out.push('\n');
    out
}

pub fn triple_to_json(g: &Network, c1: &Network, c2: &Network) -> String {
    let mut out = String::new();
    out.push_str("{\"G\": ");
    emit_network(&mut out, g);
    out.push_str(", \"C1\": ");
    emit_network(&mut out, c1);
    out.push_str(", \"C2\": ");
    emit_network(&mut out, c2);
    out.push_str("}\n");
    out
}

fn build_network(doc: NetworkDoc, what: &str) -> Result<Network> {
    if doc.layer_dims.len() < 2 || doc.layer_dims.len() != doc.layers.len() + 1 {
        return Err(CliError::Data(format!(
            "{what}: layer_dims and layers disagree"
        )));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (i, layer) in doc.layers.into_iter().enumerate() {
        let (in_dim, out_dim) = (doc.layer_dims[i], doc.layer_dims[i + 1]);
        let weight = Matrix::from_vec(out_dim, in_dim, layer.weight)
            .map_err(|e| CliError::Data(format!("{what}: layer {i}: {e}")))?;
        layers.push(
            DenseLayer::new(weight, layer.bias)
                .map_err(|e| CliError::Data(format!("{what}: layer {i}: {e}")))?,
        );
    }
    Network::from_layers(layers).map_err(|e| CliError::Data(format!("{what}: {e}")))
}

pub fn network_from_json(text: &str, what: &str) -> Result<Network> {
    let doc: NetworkDoc = serde_json::from_str(text)
        .map_err(|e| CliError::Data(format!("{what}: {e}")))?;
    build_network(doc, what)
}

pub fn triple_from_json(text: &str, what: &str) -> Result<(Network, Network, Network)> {
    let doc: TripleDoc = serde_json::from_str(text)
        .map_err(|e| CliError::Data(format!("{what}: {e}")))?;
    Ok((
        build_network(doc.g, what)?,
        build_network(doc.c1, what)?,
        build_network(doc.c2, what)?,
    ))
}

pub fn save_triple(path: &Path, g: &Network, c1: &Network, c2: &Network) -> Result<()> {
    std::fs::write(path, triple_to_json(g, c1, c2))?;
    Ok(())
}

pub fn load_triple(path: &Path) -> Result<(Network, Network, Network)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    triple_from_json(&text, &path.display().to_string())
}
