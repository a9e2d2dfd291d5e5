//! Python bindings for the parpush library: coverings, parabolic bundles,
//! direct images, torus data and the reconstruction, with rationals passed
//! as exact strings `"p/q"`.

use std::collections::BTreeMap;
use std::str::FromStr;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

use parpush::error::Error;
use parpush::hurwitz;
use parpush::oracle;
use parpush::parabolic::{
    self, BundleComponent, FlagStep, FlaggedPoint, ParabolicBundle, ResidueData, ResidueEntry,
    WeightedFlag,
};
use parpush::pushforward::UpstairsBundle;
use parpush::rational::Rational;
use parpush::scenario::Scenario;
use parpush::torus::{self, RamifiedTorusData, ReconstructionResult};

fn to_py_err(e: Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.name()))
}

fn parse_rational(text: &str) -> PyResult<Rational> {
    Rational::from_str(text).map_err(to_py_err)
}

/// One-line `[2,1,3]` or cycles `[[1,2],[3]]`, both 1-based.
fn parse_perm(obj: &Bound<'_, PyAny>, degree: usize) -> PyResult<hurwitz::Permutation> {
    if let Ok(one_line) = obj.extract::<Vec<usize>>() {
        if one_line.len() != degree {
            return Err(PyValueError::new_err(format!(
                "permutation has length {}, expected {degree}",
                one_line.len()
            )));
        }
        return hurwitz::Permutation::from_one_line(&one_line).map_err(to_py_err);
    }
    let cycles = obj.extract::<Vec<Vec<usize>>>()?;
    hurwitz::Permutation::from_cycles(degree, &cycles).map_err(to_py_err)
}

fn parse_branch(
    branch: Option<BTreeMap<String, Bound<'_, PyAny>>>,
    degree: usize,
) -> PyResult<BTreeMap<String, hurwitz::Permutation>> {
    branch
        .unwrap_or_default()
        .iter()
        .map(|(label, obj)| Ok((label.clone(), parse_perm(obj, degree)?)))
        .collect()
}

type FlagArg = (String, Vec<(usize, String)>);

fn point_component(label: &str) -> PyResult<usize> {
    if label.contains(':') {
        Ok(hurwitz::YPoint::parse(label).map_err(to_py_err)?.component)
    } else {
        Ok(0)
    }
}

fn parse_flags(flags: Option<Vec<FlagArg>>) -> PyResult<Vec<FlaggedPoint>> {
    flags
        .unwrap_or_default()
        .iter()
        .map(|(label, steps)| {
            let steps = steps
                .iter()
                .map(|(dim, weight)| Ok(FlagStep { dim: *dim, weight: parse_rational(weight)? }))
                .collect::<PyResult<Vec<_>>>()?;
            Ok(FlaggedPoint {
                label: label.clone(),
                component: point_component(label)?,
                flag: WeightedFlag::new(steps).map_err(to_py_err)?,
            })
        })
        .collect()
}

type ResidueArg = (String, Vec<String>);

fn parse_residues(entries: Vec<ResidueArg>) -> PyResult<ResidueData> {
    let entries = entries
        .iter()
        .map(|(label, eigenvalues)| {
            Ok(ResidueEntry {
                label: label.clone(),
                component: point_component(label)?,
                eigenvalues: eigenvalues
                    .iter()
                    .map(|e| parse_rational(e))
                    .collect::<PyResult<Vec<_>>>()?,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    ResidueData::new(entries).map_err(to_py_err)
}

fn residues_out(residues: &ResidueData) -> Vec<(String, Vec<String>)> {
    residues
        .entries()
        .iter()
        .map(|e| (e.label.clone(), e.eigenvalues.iter().map(|v| v.to_string()).collect()))
        .collect()
}

fn flags_out(bundle: &ParabolicBundle) -> Vec<(String, Vec<(usize, String)>)> {
    bundle
        .flags()
        .iter()
        .map(|fp| {
            (
                fp.label.clone(),
                fp.flag.steps().iter().map(|s| (s.dim, s.weight.to_string())).collect(),
            )
        })
        .collect()
}

/// A base curve: genus plus labelled marked points.
#[pyclass(name = "MarkedCurve", frozen, from_py_object)]
#[derive(Clone)]
struct PyMarkedCurve {
    inner: hurwitz::MarkedCurve,
}

#[pymethods]
impl PyMarkedCurve {
    #[new]
    fn new(genus: usize, marked_points: Vec<String>) -> PyResult<Self> {
        Ok(PyMarkedCurve {
            inner: hurwitz::MarkedCurve::new(genus, marked_points).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn genus(&self) -> usize {
        self.inner.genus()
    }

    #[getter]
    fn marked_points(&self) -> Vec<String> {
        self.inner.marked_points().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "MarkedCurve(genus={}, marked_points={:?})",
            self.inner.genus(),
            self.inner.marked_points()
        )
    }
}

/// A branched covering as monodromy data on sheets.
#[pyclass(name = "Covering", frozen, from_py_object)]
#[derive(Clone)]
struct PyCovering {
    inner: hurwitz::CoveringMonodromy,
}

#[pymethods]
impl PyCovering {
    #[new]
    #[pyo3(signature = (base, degree, handles=None, branch=None))]
    fn new(
        base: PyMarkedCurve,
        degree: usize,
        handles: Option<Vec<Bound<'_, PyAny>>>,
        branch: Option<BTreeMap<String, Bound<'_, PyAny>>>,
    ) -> PyResult<Self> {
        let handles = handles
            .unwrap_or_default()
            .iter()
            .map(|h| parse_perm(h, degree))
            .collect::<PyResult<Vec<_>>>()?;
        let branch = parse_branch(branch, degree)?;
        Ok(PyCovering {
            inner: hurwitz::CoveringMonodromy::new(base.inner, degree, handles, branch)
                .map_err(to_py_err)?,
        })
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn base(&self) -> PyMarkedCurve {
        PyMarkedCurve { inner: self.inner.base().clone() }
    }

    /// Violations of the covering conditions; empty means valid.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().violations
    }

    /// Connected components: (1-based sheets, genus).
    fn components(&self) -> PyResult<Vec<(Vec<usize>, usize)>> {
        Ok(self
            .inner
            .components()
            .map_err(to_py_err)?
            .iter()
            .map(|c| (c.sheets.iter().map(|s| s + 1).collect(), c.genus))
            .collect())
    }

    /// The fiber over a marked point: (canonical point name, multiplicity).
    fn ramification_profile(&self, label: &str) -> PyResult<Vec<(String, usize)>> {
        let components = self.inner.components().map_err(to_py_err)?;
        Ok(self
            .inner
            .ramification_profile(label)
            .map_err(to_py_err)?
            .into_iter()
            .map(|cycle| {
                let sheet = cycle.sheets[0];
                let component = components
                    .iter()
                    .position(|c| c.contains(sheet))
                    .expect("sheet below degree");
                (
                    hurwitz::YPoint { component, base: label.to_string(), sheet }.label(),
                    cycle.multiplicity,
                )
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Covering(degree={})", self.inner.degree())
    }
}

/// A parabolic bundle on the (connected) base curve.
#[pyclass(name = "Bundle", frozen, from_py_object)]
#[derive(Clone)]
struct PyBundle {
    inner: ParabolicBundle,
}

#[pymethods]
impl PyBundle {
    #[new]
    #[pyo3(signature = (rank, degree, flags=None))]
    fn new(rank: usize, degree: i64, flags: Option<Vec<FlagArg>>) -> PyResult<Self> {
        Ok(PyBundle {
            inner: ParabolicBundle::new(
                vec![BundleComponent { rank, degree }],
                parse_flags(flags)?,
            )
            .map_err(to_py_err)?,
        })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.components()[0].rank
    }

    #[getter]
    fn degree(&self) -> i64 {
        self.inner.components()[0].degree
    }

    fn flags(&self) -> Vec<(String, Vec<(usize, String)>)> {
        flags_out(&self.inner)
    }

    fn par_deg(&self) -> String {
        self.inner.par_deg().to_string()
    }

    fn flag_end_degree(&self) -> i64 {
        self.inner.flag_end_degree()
    }

    /// Whether the residue data makes a parabolic connection on this bundle.
    fn is_parabolic_connection(&self, residues: Vec<ResidueArg>) -> PyResult<bool> {
        parabolic::is_parabolic_connection(&self.inner, &parse_residues(residues)?)
            .map_err(to_py_err)
    }

    /// The trace identity: degree = -(sum of residue traces).
    fn ohtsuki_check(&self, residues: Vec<ResidueArg>) -> PyResult<bool> {
        parabolic::ohtsuki_check(&self.inner, &parse_residues(residues)?).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("Bundle(rank={}, degree={})", self.rank(), self.degree())
    }
}

/// A parabolic bundle on the covering curve, ready to push forward.
#[pyclass(name = "UpstairsBundle", frozen, from_py_object)]
#[derive(Clone)]
struct PyUpstairsBundle {
    inner: UpstairsBundle,
}

#[pymethods]
impl PyUpstairsBundle {
    #[new]
    #[pyo3(signature = (covering, components, flags=None))]
    fn new(
        covering: PyCovering,
        components: Vec<(usize, i64)>,
        flags: Option<Vec<FlagArg>>,
    ) -> PyResult<Self> {
        let bundle = ParabolicBundle::new(
            components
                .into_iter()
                .map(|(rank, degree)| BundleComponent { rank, degree })
                .collect(),
            parse_flags(flags)?,
        )
        .map_err(to_py_err)?;
        Ok(PyUpstairsBundle {
            inner: UpstairsBundle::new(covering.inner, bundle).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn covering(&self) -> PyCovering {
        PyCovering { inner: self.inner.covering().clone() }
    }

    fn components(&self) -> Vec<(usize, i64)> {
        self.inner.bundle().components().iter().map(|c| (c.rank, c.degree)).collect()
    }

    fn flags(&self) -> Vec<(String, Vec<(usize, String)>)> {
        flags_out(self.inner.bundle())
    }

    fn par_deg(&self) -> String {
        self.inner.bundle().par_deg().to_string()
    }

    #[pyo3(signature = (keep_trivial=false))]
    fn push_forward(&self, keep_trivial: bool) -> PyResult<PyBundle> {
        Ok(PyBundle { inner: self.inner.push_forward_with(keep_trivial).map_err(to_py_err)? })
    }

    #[pyo3(signature = (residues=None))]
    fn push_forward_residues(
        &self,
        residues: Option<Vec<ResidueArg>>,
    ) -> PyResult<Vec<(String, Vec<String>)>> {
        let residues = parse_residues(residues.unwrap_or_default())?;
        Ok(residues_out(&self.inner.push_forward_residues(&residues).map_err(to_py_err)?))
    }

    /// Push a parabolic connection forward and re-check parabolicity.
    #[pyo3(signature = (residues=None))]
    fn verify_parabolicity(&self, residues: Option<Vec<ResidueArg>>) -> PyResult<bool> {
        self.inner
            .verify_parabolicity(&parse_residues(residues.unwrap_or_default())?)
            .map_err(to_py_err)
    }

    /// The canonical parabolic residue data: eigenvalue = weight.
    fn parabolic_residues(&self) -> Vec<(String, Vec<String>)> {
        residues_out(&parabolic::parabolic_residues(self.inner.bundle()))
    }

    /// The canonical ramified torus datum of the direct image.
    fn torus(&self) -> PyTorus {
        PyTorus { inner: torus::torus_from_direct_image(&self.inner) }
    }

    fn verify_roundtrip_covering(&self) -> PyResult<bool> {
        torus::verify_roundtrip_covering(&self.inner).map_err(to_py_err)
    }

    #[pyo3(signature = (residues=None))]
    fn verify_roundtrip_connection(&self, residues: Option<Vec<ResidueArg>>) -> PyResult<bool> {
        torus::verify_roundtrip_connection(
            &self.inner,
            &parse_residues(residues.unwrap_or_default())?,
        )
        .map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "UpstairsBundle(degree={}, components={:?})",
            self.inner.covering().degree(),
            self.components()
        )
    }
}

/// Block ranks plus a monodromy action on blocks.
#[pyclass(name = "Torus", frozen, from_py_object)]
#[derive(Clone)]
struct PyTorus {
    inner: RamifiedTorusData,
}

#[pymethods]
impl PyTorus {
    #[new]
    #[pyo3(signature = (block_ranks, handles=None, branch=None))]
    fn new(
        block_ranks: Vec<usize>,
        handles: Option<Vec<Bound<'_, PyAny>>>,
        branch: Option<BTreeMap<String, Bound<'_, PyAny>>>,
    ) -> PyResult<Self> {
        let n = block_ranks.len();
        let handles = handles
            .unwrap_or_default()
            .iter()
            .map(|h| parse_perm(h, n))
            .collect::<PyResult<Vec<_>>>()?;
        let branch = parse_branch(branch, n)?;
        Ok(PyTorus {
            inner: RamifiedTorusData::new(block_ranks, handles, branch).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn block_ranks(&self) -> Vec<usize> {
        self.inner.block_ranks().to_vec()
    }

    /// Branch permutations in 1-based one-line notation.
    fn branch(&self) -> BTreeMap<String, Vec<usize>> {
        self.inner
            .branch()
            .iter()
            .map(|(label, p)| (label.clone(), p.one_line()))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Torus(block_ranks={:?})", self.inner.block_ranks())
    }
}

/// The result of a reconstruction: covering, bundle upstairs, assignment.
#[pyclass(name = "Reconstruction", frozen)]
struct PyReconstruction {
    inner: ReconstructionResult,
    bundle: ParabolicBundle,
}

#[pymethods]
impl PyReconstruction {
    #[getter]
    fn covering(&self) -> PyCovering {
        PyCovering { inner: self.inner.covering.clone() }
    }

    #[getter]
    fn upstairs(&self) -> PyUpstairsBundle {
        PyUpstairsBundle { inner: self.inner.upstairs.clone() }
    }

    #[getter]
    fn ambiguous(&self) -> bool {
        self.inner.ambiguous
    }

    /// Per piece: (base point, downstairs weight, dim, point upstairs,
    /// level, upstairs weight).
    fn assignment(&self) -> Vec<(String, String, usize, String, usize, String)> {
        self.inner
            .assignment
            .iter()
            .map(|r| {
                (
                    r.base_point.clone(),
                    r.downstairs_weight.to_string(),
                    r.dim,
                    r.point.label(),
                    r.level,
                    r.upstairs_weight.to_string(),
                )
            })
            .collect()
    }

    /// Transfer downstairs residue data to the bundle upstairs; raises when
    /// the connection does not preserve the torus.
    fn induce_connection(&self, residues: Vec<ResidueArg>) -> PyResult<Vec<(String, Vec<String>)>> {
        let induced =
            torus::induce_connection(&self.bundle, &parse_residues(residues)?, &self.inner)
                .map_err(to_py_err)?;
        Ok(residues_out(&induced))
    }

    fn __repr__(&self) -> String {
        format!(
            "Reconstruction(degree={}, ambiguous={})",
            self.inner.covering.degree(),
            self.inner.ambiguous
        )
    }
}

/// Canonical form of `p/q` as a string.
#[pyfunction]
fn normalize(p: i64, q: i64) -> PyResult<String> {
    Ok(Rational::new(p, q).map_err(to_py_err)?.to_string())
}

/// `x - floor(x)` of a rational string, in `[0, 1)`.
#[pyfunction]
fn frac_part(x: &str) -> PyResult<String> {
    Ok(parse_rational(x)?.frac_part().to_string())
}

/// Rebuild covering and bundle upstairs from bundle + torus datum.
#[pyfunction]
fn reconstruct(
    base: PyMarkedCurve,
    bundle: PyBundle,
    torus: PyTorus,
) -> PyResult<PyReconstruction> {
    let rec = torus::reconstruct(&base.inner, &bundle.inner, &torus.inner).map_err(to_py_err)?;
    Ok(PyReconstruction { inner: rec, bundle: bundle.inner })
}

/// Characteristic polynomial (monic, highest degree first, as strings) of
/// the residue of the pushed local model `D = d + diag(taus) dw/w`.
#[pyfunction]
#[pyo3(signature = (taus, b, precision=oracle::DEFAULT_PRECISION))]
fn oracle_pushforward_char_poly(
    taus: Vec<String>,
    b: usize,
    precision: i64,
) -> PyResult<Vec<String>> {
    let taus = taus.iter().map(|t| parse_rational(t)).collect::<PyResult<Vec<_>>>()?;
    let model = oracle::LaurentModel::diagonal(&taus, precision);
    let pushed = oracle::oracle_pushforward(&model, b).map_err(to_py_err)?;
    Ok(pushed.residue_char_poly().iter().map(|c| c.to_string()).collect())
}

/// `prod (x - root)` as coefficient strings, for comparing spectra.
#[pyfunction]
fn monic_from_roots(roots: Vec<String>) -> PyResult<Vec<String>> {
    let roots = roots.iter().map(|r| parse_rational(r)).collect::<PyResult<Vec<_>>>()?;
    Ok(oracle::monic_from_roots(&roots).iter().map(|c| c.to_string()).collect())
}

/// Load a scenario document; returns a dict of the sections present.
#[pyfunction]
fn load_scenario(py: Python<'_>, text: &str) -> PyResult<BTreeMap<String, Py<PyAny>>> {
    let scenario = Scenario::from_json(text).map_err(to_py_err)?;
    let mut out: BTreeMap<String, Py<PyAny>> = BTreeMap::new();
    if let Some(base) = scenario.base {
        out.insert("base".into(), PyMarkedCurve { inner: base }.into_pyobject(py)?.into_any().unbind());
    }
    if let Some(covering) = scenario.covering {
        out.insert("covering".into(), PyCovering { inner: covering }.into_pyobject(py)?.into_any().unbind());
    }
    if let Some(upstairs) = scenario.upstairs {
        out.insert(
            "upstairs".into(),
            PyUpstairsBundle { inner: upstairs }.into_pyobject(py)?.into(),
        );
    }
    if let Some(downstairs) = scenario.downstairs {
        out.insert("downstairs".into(), PyBundle { inner: downstairs }.into_pyobject(py)?.into_any().unbind());
    }
    if let Some(residues) = scenario.residues {
        out.insert("residues".into(), residues_out(&residues).into_pyobject(py)?.into_any().unbind());
    }
    if let Some(torus) = scenario.torus {
        out.insert("torus".into(), PyTorus { inner: torus }.into_pyobject(py)?.into_any().unbind());
    }
    Ok(out)
}

#[pymodule]
fn parpush_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMarkedCurve>()?;
    m.add_class::<PyCovering>()?;
    m.add_class::<PyBundle>()?;
    m.add_class::<PyUpstairsBundle>()?;
    m.add_class::<PyTorus>()?;
    m.add_class::<PyReconstruction>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(frac_part, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_pushforward_char_poly, m)?)?;
    m.add_function(wrap_pyfunction!(monic_from_roots, m)?)?;
    m.add_function(wrap_pyfunction!(load_scenario, m)?)?;
    Ok(())
}
