//! Python bindings. Vertices are dense ids `0..n`; `Graph.labels()` maps
//! them back to the labels of the input file.

use std::fs;

use cfmg::engine::{OneEndCase, PartKind};
use cfmg::generator::{self, GenSpec, PayloadMode};
use cfmg::oracle::{verify_cube_free, verify_median_graph};
use cfmg::{BuildOptions, Error, IntervalIndex, SemigroupKind, SemigroupSpec};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

create_exception!(cfmg, CfmgError, PyException, "Invalid input or failed structural check.");
create_exception!(cfmg, RejectedError, CfmgError, "The graph is not a cube-free median graph.");

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Rejected(_) => RejectedError::new_err(e.to_string()),
        other => CfmgError::new_err(other.to_string()),
    }
}

/// A simple connected graph with optional per-vertex payloads.
#[pyclass(module = "cfmg", frozen)]
struct Graph {
    inner: cfmg::Graph,
}

#[pymethods]
impl Graph {
    #[new]
    fn new(n: usize, edges: Vec<(u32, u32)>) -> PyResult<Self> {
        Ok(Self {
            inner: cfmg::Graph::from_edges(n, &edges).map_err(err)?,
        })
    }

    /// Parses the text format: `n m`, then `m` edge lines, then an optional
    /// `#payloads` section.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: cfmg::Graph::parse(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        Self::parse(&text)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn edges(&self) -> Vec<(u32, u32)> {
        self.inner.edges().collect()
    }

    fn neighbors(&self, v: u32) -> PyResult<Vec<u32>> {
        self.check(v)?;
        Ok(self.inner.neighbors(v).to_vec())
    }

    fn labels(&self) -> Vec<u64> {
        self.inner.labels().to_vec()
    }

    fn id_of(&self, label: u64) -> Option<u32> {
        self.inner.id_of(label)
    }

    fn payloads(&self) -> Vec<Option<u64>> {
        (0..self.inner.n() as u32).map(|v| self.inner.raw_payload(v)).collect()
    }

    fn with_payloads(&self, payloads: Vec<u64>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.clone().with_payloads(payloads).map_err(err)?,
        })
    }

    fn distances(&self, source: u32) -> PyResult<Vec<u32>> {
        cfmg::graph::bfs_distances(&self.inner, source).map_err(err)
    }

    /// `I[u, v]` by brute force, sorted.
    fn interval(&self, u: u32, v: u32) -> PyResult<Vec<u32>> {
        Ok(cfmg::oracle::interval_bruteforce(&self.inner, u, v).map_err(err)?.members().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.inner.n(), self.inner.edge_count())
    }
}

impl Graph {
    fn check(&self, v: u32) -> PyResult<()> {
        if (v as usize) < self.inner.n() {
            Ok(())
        } else {
            Err(err(Error::VertexOutOfRange {
                vertex: v as u64,
                n: self.inner.n(),
            }))
        }
    }
}

/// Generates a graph. `size` is `n`, `(cols, rows)` or a string like `"4x6"`.
#[pyfunction]
#[pyo3(signature = (family, size, seed = 0, payload = "default"))]
fn generate(family: &str, size: &Bound<'_, PyAny>, seed: u64, payload: &str) -> PyResult<Graph> {
    let size: Vec<usize> = if let Ok(s) = size.extract::<String>() {
        generator::parse_size(&s).map_err(err)?
    } else if let Ok(n) = size.extract::<usize>() {
        vec![n]
    } else {
        size.extract()?
    };
    let family = family.parse().map_err(err)?;
    let payload: PayloadMode = payload.parse().map_err(err)?;
    let spec = GenSpec::new(family, &size, seed).with_payload(payload);
    Ok(Graph {
        inner: generator::generate(&spec).map_err(err)?,
    })
}

/// Runs the median and cube-freeness checks; one dict per check.
#[pyfunction]
#[pyo3(signature = (graph, force = false))]
fn verify<'py>(py: Python<'py>, graph: &Graph, force: bool) -> PyResult<Bound<'py, PyList>> {
    let out = PyList::empty(py);
    for r in [verify_median_graph(&graph.inner, force), verify_cube_free(&graph.inner, force)] {
        let r = r.map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("check", r.check)?;
        d.set_item("ok", r.ok)?;
        d.set_item("witness", r.witness)?;
        d.set_item("message", r.message)?;
        out.append(d)?;
    }
    Ok(out)
}

fn kind_name(k: PartKind) -> &'static str {
    match k {
        PartKind::Leaf => "leaf",
        PartKind::Single => "single",
        PartKind::Special => "special",
        PartKind::Staircase => "staircase",
        PartKind::TreePath => "tree_path",
    }
}

fn case_name(c: OneEndCase) -> &'static str {
    match c {
        OneEndCase::NoStaircase => "no_staircase",
        OneEndCase::SingleImprint => "single_imprint",
        OneEndCase::SingleImprintD => "single_imprint_d",
        OneEndCase::SingleImprintE => "single_imprint_e",
        OneEndCase::DoubleImprints => "double_imprints",
    }
}

/// Interval-query index over a cube-free median graph.
#[pyclass(module = "cfmg", frozen)]
struct Index {
    inner: IntervalIndex<SemigroupSpec>,
}

#[pymethods]
impl Index {
    /// Builds the index. Payloads come from `values` when given, otherwise
    /// from the graph with the semigroup's defaults.
    #[staticmethod]
    #[pyo3(signature = (graph, semigroup = "sum", *, values = None, seed = 0, leaf_size = 32, trust = false))]
    fn build(
        py: Python<'_>,
        graph: &Graph,
        semigroup: &str,
        values: Option<Vec<u64>>,
        seed: u64,
        leaf_size: usize,
        trust: bool,
    ) -> PyResult<Self> {
        let kind: SemigroupKind = semigroup.parse().map_err(err)?;
        let values = values.unwrap_or_else(|| kind.payloads(&graph.inner, seed));
        let mut opts = BuildOptions::default().leaf_size(leaf_size);
        opts.trust = trust;
        let g = &graph.inner;
        let inner = py
            .detach(|| IntervalIndex::build(g, SemigroupSpec::new(kind), values, &opts))
            .map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn semigroup(&self) -> &'static str {
        self.inner.semigroup().name()
    }

    fn values(&self) -> Vec<u64> {
        self.inner.values().to_vec()
    }

    /// The semigroup sum over `I[u, v]`.
    fn query(&self, u: u32, v: u32) -> PyResult<u64> {
        self.inner.query(u, v).map_err(err)
    }

    fn query_many(&self, py: Python<'_>, pairs: Vec<(u32, u32)>) -> PyResult<Vec<u64>> {
        py.detach(|| pairs.iter().map(|&(u, v)| self.inner.query(u, v)).collect::<cfmg::Result<_>>())
            .map_err(err)
    }

    fn median(&self, a: u32, b: u32, c: u32) -> PyResult<u32> {
        self.inner.median_of_three(a, b, c).map_err(err)
    }

    fn distance(&self, u: u32, v: u32) -> PyResult<u32> {
        self.inner.distance(u, v).map_err(err)
    }

    /// The parts a query for `(u, v)` is answered from: a dict with `parts`
    /// (each `kind`, `from`, `to`, `depth`), `cases` and `fibers`.
    fn decompose<'py>(&self, py: Python<'py>, u: u32, v: u32) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.decompose(u, v).map_err(err)?;
        let parts = PyList::empty(py);
        for p in &d.parts {
            let item = PyDict::new(py);
            item.set_item("kind", kind_name(p.kind))?;
            item.set_item("from", p.from)?;
            item.set_item("to", p.to)?;
            item.set_item("depth", p.depth)?;
            parts.append(item)?;
        }
        let out = PyDict::new(py);
        out.set_item("parts", parts)?;
        out.set_item("cases", d.cases.iter().map(|&c| case_name(c)).collect::<Vec<_>>())?;
        out.set_item("fibers", d.fibers)?;
        Ok(out)
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("n", s.n)?;
        d.set_item("nodes", s.nodes)?;
        d.set_item("leaves", s.leaves)?;
        d.set_item("depth", s.depth)?;
        d.set_item("special_entries", s.special_entries)?;
        d.set_item("segment_entries", s.segment_entries)?;
        d.set_item("heavy_paths", s.heavy_paths)?;
        d.set_item("entries", s.entries())?;
        d.set_item("max_fiber_ratio", s.max_fiber_ratio)?;
        Ok(d)
    }

    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        self.inner.to_bytes().map_err(err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: IntervalIndex::from_bytes(data).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let data = fs::read(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        Self::from_bytes(&data)
    }

    fn __repr__(&self) -> String {
        let s = self.inner.stats();
        format!("Index(n={}, semigroup={}, depth={})", s.n, self.inner.semigroup().name(), s.depth)
    }
}

#[pymodule(name = "cfmg")]
pub fn cfmg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<Graph>()?;
    m.add_class::<Index>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("CfmgError", py.get_type::<CfmgError>())?;
    m.add("RejectedError", py.get_type::<RejectedError>())?;
    m.add("FAMILIES", cfmg::generator::Family::ALL.map(|f| f.name()).to_vec())?;
    m.add("SEMIGROUPS", SemigroupKind::ALL.map(|k| k.name()).to_vec())?;
    Ok(())
}
