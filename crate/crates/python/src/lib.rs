//! Python bindings for the scene tokenizer.

use std::collections::HashMap;

use numpy::{IntoPyArray, PyArray1, PyArray2, PyReadonlyArray1, PyReadonlyArray2};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use sfctok_core::enhancer::EnhancerConfig;
use sfctok_core::gfm::GfmConfig;
use sfctok_core::sfc::{CurveKind, ExtentPolicy};
use sfctok_core::{Error, PipelineConfig, PointCloud, TokenMatrix};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn curve_kind(name: &str) -> PyResult<CurveKind> {
    CurveKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown curve '{name}'")))
}

fn make_config(overrides: Option<HashMap<String, Bound<'_, PyAny>>>) -> PyResult<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    for (k, v) in overrides.unwrap_or_default() {
        let text = if v.is_instance_of::<pyo3::types::PyBool>() {
            if v.is_truthy()? { "true".to_string() } else { "false".to_string() }
        } else {
            v.str()?.to_string()
        };
        cfg.set(&k, &text).map_err(to_py)?;
    }
    Ok(cfg)
}

/// Morton key of one grid cell.
#[pyfunction]
fn morton_encode(x: u32, y: u32, z: u32, bits: u32) -> u64 {
    sfctok_core::sfc::morton_encode(sfctok_core::sfc::GridCoord { x, y, z, bits })
}

/// Hilbert key of one grid cell.
#[pyfunction]
fn hilbert_encode(x: u32, y: u32, z: u32, bits: u32) -> u64 {
    sfctok_core::sfc::hilbert_encode(sfctok_core::sfc::GridCoord { x, y, z, bits })
}

/// Permutation sorting `centers` (M×3) along a curve.
#[pyfunction]
#[pyo3(signature = (centers, curve = "hilbert", bits = 10))]
fn serialize<'py>(
    py: Python<'py>,
    centers: PyReadonlyArray2<'py, f64>,
    curve: &str,
    bits: u32,
) -> PyResult<Bound<'py, PyArray1<u64>>> {
    let order = sfctok_core::sfc::serialize(centers.as_array(), curve_kind(curve)?, bits, ExtentPolicy::Collapse)
        .map_err(to_py)?;
    Ok(order.perm.iter().map(|&i| i as u64).collect::<Vec<_>>().into_pyarray(py))
}

/// Windowed low-pass context enhancement over all four curves.
#[pyfunction]
#[pyo3(signature = (feats, centers, window = 64, stride = 16, keep_bins = 128, bits = 10))]
fn enhance<'py>(
    py: Python<'py>,
    feats: PyReadonlyArray2<'py, f64>,
    centers: PyReadonlyArray2<'py, f64>,
    window: usize,
    stride: usize,
    keep_bins: usize,
    bits: u32,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let tokens = TokenMatrix::new(feats.as_array().to_owned(), centers.as_array().to_owned()).map_err(to_py)?;
    let curves = sfctok_core::sfc::serialize_all(tokens.centers.view(), bits, ExtentPolicy::Collapse).map_err(to_py)?;
    let cfg = EnhancerConfig::low_pass(window, stride, keep_bins);
    let out = sfctok_core::enhancer::enhance(&tokens, &cfg, &curves).map_err(to_py)?;
    Ok(out.feats.into_pyarray(py))
}

/// Log-domain Sinkhorn. Returns `(plan, residual, iterations)`.
#[pyfunction]
#[pyo3(signature = (logits, mu, nu, tau = 0.05, iters = 5, tol = 1e-6))]
fn sinkhorn<'py>(
    py: Python<'py>,
    logits: PyReadonlyArray2<'py, f64>,
    mu: PyReadonlyArray1<'py, f64>,
    nu: PyReadonlyArray1<'py, f64>,
    tau: f64,
    iters: usize,
    tol: f64,
) -> PyResult<(Bound<'py, PyArray2<f64>>, f64, usize)> {
    let mu = mu.as_array().to_vec();
    let nu = nu.as_array().to_vec();
    let plan = sfctok_core::merge::sinkhorn(logits.as_array(), &mu, &nu, tau, iters, tol).map_err(to_py)?;
    Ok((plan.plan.into_pyarray(py), plan.residual, plan.iterations))
}

/// Channel-spectrum filter with averaged residual. `filters` is H×(D/H/2+1).
#[pyfunction]
fn gfm_apply<'py>(
    py: Python<'py>,
    z: PyReadonlyArray2<'py, f64>,
    filters: PyReadonlyArray2<'py, f64>,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let f = filters.as_array();
    let rows: Vec<Vec<f64>> = f.outer_iter().map(|r| r.to_vec()).collect();
    let cfg = GfmConfig::new(z.as_array().ncols(), rows.len(), rows).map_err(to_py)?;
    Ok(sfctok_core::gfm::gfm_apply(z.as_array(), &cfg).map_err(to_py)?.into_pyarray(py))
}

/// Full pipeline with seeded weights. `config` maps setting names to values.
/// Returns `(feats, centers, summary)`.
#[pyfunction]
#[pyo3(signature = (positions, features, labels = None, config = None))]
fn tokenize<'py>(
    py: Python<'py>,
    positions: PyReadonlyArray2<'py, f64>,
    features: PyReadonlyArray2<'py, f64>,
    labels: Option<PyReadonlyArray1<'py, i64>>,
    config: Option<HashMap<String, Bound<'py, PyAny>>>,
) -> PyResult<(Bound<'py, PyArray2<f64>>, Bound<'py, PyArray2<f64>>, HashMap<String, String>)> {
    let cfg = make_config(config)?;
    let cloud = PointCloud::new(positions.as_array().to_owned(), features.as_array().to_owned()).map_err(to_py)?;
    let labels = labels.map(|l| l.as_array().to_vec());
    let (tokens, report) = py
        .detach(|| sfctok_core::tokenize(&cloud, labels.as_deref(), &cfg, None))
        .map_err(to_py)?;
    let summary = report
        .to_kv()
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    Ok((tokens.feats.into_pyarray(py), tokens.centers.into_pyarray(py), summary))
}

/// Read a PLY file. Returns `(positions, features)`.
#[pyfunction]
fn load_ply<'py>(py: Python<'py>, path: &str) -> PyResult<(Bound<'py, PyArray2<f64>>, Bound<'py, PyArray2<f64>>)> {
    let c = sfctok_core::io::load_ply(path).map_err(to_py)?;
    Ok((c.positions.into_pyarray(py), c.features.into_pyarray(py)))
}

/// Read a token file. Returns `(feats, centers)`.
#[pyfunction]
fn read_tokens<'py>(py: Python<'py>, path: &str) -> PyResult<(Bound<'py, PyArray2<f64>>, Bound<'py, PyArray2<f64>>)> {
    let t = sfctok_core::io::read_tokens(path).map_err(to_py)?;
    Ok((t.feats.into_pyarray(py), t.centers.into_pyarray(py)))
}

#[pyfunction]
fn write_tokens(path: &str, feats: PyReadonlyArray2<'_, f64>, centers: PyReadonlyArray2<'_, f64>) -> PyResult<()> {
    let t = TokenMatrix::new(feats.as_array().to_owned(), centers.as_array().to_owned()).map_err(to_py)?;
    sfctok_core::io::write_tokens(path, &t, sfctok_core::io::Precision::F64).map_err(to_py)
}

/// Seeded synthetic room. Returns `(positions, features, labels)`.
#[pyfunction]
#[pyo3(signature = (n, seed = 0))]
fn room_scene<'py>(
    py: Python<'py>,
    n: usize,
    seed: u64,
) -> (Bound<'py, PyArray2<f64>>, Bound<'py, PyArray2<f64>>, Bound<'py, PyArray1<i64>>) {
    let s = sfctok_core::synth::room_scene(n, seed);
    let PointCloud { positions, features } = s.cloud;
    (positions.into_pyarray(py), features.into_pyarray(py), s.labels.into_pyarray(py))
}

/// Default pipeline settings as a `key -> value` dict.
#[pyfunction]
fn default_config() -> HashMap<String, String> {
    let cfg = PipelineConfig::default();
    PipelineConfig::KEYS
        .iter()
        .map(|k| (k.to_string(), cfg.get(k).expect("listed key")))
        .collect()
}

#[pymodule]
fn sfctok(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(morton_encode, m)?)?;
    m.add_function(wrap_pyfunction!(hilbert_encode, m)?)?;
    m.add_function(wrap_pyfunction!(serialize, m)?)?;
    m.add_function(wrap_pyfunction!(enhance, m)?)?;
    m.add_function(wrap_pyfunction!(sinkhorn, m)?)?;
    m.add_function(wrap_pyfunction!(gfm_apply, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(load_ply, m)?)?;
    m.add_function(wrap_pyfunction!(read_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(write_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(room_scene, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
