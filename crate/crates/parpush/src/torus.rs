//! Ramified torus sub-bundles in combinatorial form, and the inverse of the
//! direct-image construction.
//!
//! The torus attached to a direct image decomposes the generic fiber into
//! one block per sheet of the covering, permuted by the monodromy. The data
//! kept here is exactly that shadow: block ranks plus a monodromy action on
//! blocks. Conversely, `reconstruct` rebuilds the covering from the blocks
//! and solves an exact-cover problem on the weighted flag pieces to recover
//! the bundle upstairs; `induce_connection` inverts the residue rule
//! `rho = (tau + c) / b` level by level.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hurwitz::{CoveringMonodromy, MarkedCurve, Permutation, YPoint};
use crate::parabolic::{
    FlagStep, FlaggedPoint, BundleComponent, ParabolicBundle, ResidueData, ResidueEntry,
    WeightedFlag,
};
use crate::pushforward::UpstairsBundle;
use crate::rational::Rational;

/// Block decomposition of the generic fiber together with the monodromy
/// action on blocks; the combinatorial form of a ramified torus sub-bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RamifiedTorusData {
    block_ranks: Vec<usize>,
    handles: Vec<Permutation>,
    branch: BTreeMap<String, Permutation>,
}

impl RamifiedTorusData {
    pub fn new(
        block_ranks: Vec<usize>,
        handles: Vec<Permutation>,
        mut branch: BTreeMap<String, Permutation>,
    ) -> Result<Self> {
        if block_ranks.is_empty() || block_ranks.contains(&0) {
            return Err(Error::RankMismatch("block ranks must be positive".into()));
        }
        let n = block_ranks.len();
        for p in handles.iter().chain(branch.values()) {
            if p.degree() != n {
                return Err(Error::RankMismatch(format!(
                    "permutation of degree {} on {} blocks",
                    p.degree(),
                    n
                )));
            }
            for i in 0..n {
                if block_ranks[p.apply(i)] != block_ranks[i] {
                    return Err(Error::RankMismatch(format!(
                        "block monodromy must preserve block ranks: {} -> {}",
                        i + 1,
                        p.apply(i) + 1
                    )));
                }
            }
        }
        // canonical form: unbranched points carry no entry, so equality is
        // independent of whether identities were spelled out
        branch.retain(|_, p| !p.is_identity());
        Ok(RamifiedTorusData { block_ranks, handles, branch })
    }

    pub fn block_ranks(&self) -> &[usize] {
        &self.block_ranks
    }

    pub fn handles(&self) -> &[Permutation] {
        &self.handles
    }

    pub fn branch(&self) -> &BTreeMap<String, Permutation> {
        &self.branch
    }

    pub fn total_rank(&self) -> usize {
        self.block_ranks.iter().sum()
    }

    /// The covering whose sheets are the blocks.
    pub fn to_covering(&self, base: &MarkedCurve) -> Result<CoveringMonodromy> {
        CoveringMonodromy::new(
            base.clone(),
            self.block_ranks.len(),
            self.handles.clone(),
            self.branch.clone(),
        )
    }
}

/// The canonical torus of a direct image: one block per sheet, with rank the
/// rank of the component the sheet lies on, permuted by the covering's own
/// monodromy.
pub fn torus_from_direct_image(u: &UpstairsBundle) -> RamifiedTorusData {
    let block_ranks = (0..u.covering().degree())
        .map(|sheet| {
            let comp = u
                .components()
                .iter()
                .position(|c| c.contains(sheet))
                .expect("sheet below degree");
            u.bundle().components()[comp].rank
        })
        .collect();
    RamifiedTorusData::new(
        block_ranks,
        u.covering().handles().to_vec(),
        u.covering().branch_perms().clone(),
    )
    .expect("direct-image torus data is well-formed")
}

/// Where one graded piece of the downstairs flag ended up upstairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentRecord {
    pub base_point: String,
    pub downstairs_weight: Rational,
    pub dim: usize,
    pub point: YPoint,
    pub level: usize,
    pub upstairs_weight: Rational,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub covering: CoveringMonodromy,
    pub upstairs: UpstairsBundle,
    pub assignment: Vec<AssignmentRecord>,
    /// True when some marked point admitted more than one exact cover of its
    /// weight pieces; the lexicographically least one was chosen.
    pub ambiguous: bool,
}

/// One candidate upstairs flag for one fiber point: `(dim, weight)` pairs in
/// increasing weight order.
type CycleFlag = Vec<(usize, Rational)>;

struct CycleSpec {
    point: YPoint,
    multiplicity: usize,
    rank: usize,
}

/// All ways to carve the weighted supply at one marked point into upstairs
/// flags, one per cycle: a flag step `(d, lambda)` on a cycle of multiplicity
/// `b` consumes `d` units at each weight `(c + lambda) / b`, `c = 0..b`.
/// Solutions are returned sorted, so the first is the canonical one.
fn enumerate_point_assignments(
    supply: &BTreeMap<Rational, usize>,
    cycles: &[CycleSpec],
) -> Vec<Vec<CycleFlag>> {
    fn cycle_weights(lambda: &Rational, b: usize) -> Vec<Rational> {
        (0..b)
            .map(|c| {
                (Rational::int(c as i64) + lambda.clone())
                    .checked_div(&Rational::int(b as i64))
                    .expect("b > 0")
            })
            .collect()
    }

    fn candidates(supply: &BTreeMap<Rational, usize>, b: usize) -> Vec<(Rational, usize)> {
        let mut out: Vec<(Rational, usize)> = Vec::new();
        for weight in supply.keys() {
            let lambda = weight.scale(b as i64).frac_part();
            if out.iter().any(|(l, _)| *l == lambda) {
                continue;
            }
            let cap = cycle_weights(&lambda, b)
                .iter()
                .map(|w| supply.get(w).copied().unwrap_or(0))
                .min()
                .unwrap_or(0);
            if cap > 0 {
                out.push((lambda, cap));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// distribute `remaining` units over `cands[i..]`
    fn fill_cycle(
        cands: &[(Rational, usize)],
        i: usize,
        remaining: usize,
        acc: &mut CycleFlag,
        out: &mut Vec<CycleFlag>,
    ) {
        if remaining == 0 {
            out.push(acc.iter().filter(|(d, _)| *d > 0).cloned().collect());
            return;
        }
        if i == cands.len() {
            return;
        }
        let (lambda, cap) = &cands[i];
        for d in 0..=(*cap).min(remaining) {
            acc.push((d, lambda.clone()));
            fill_cycle(cands, i + 1, remaining - d, acc, out);
            acc.pop();
        }
    }

    fn search(
        supply: &mut BTreeMap<Rational, usize>,
        cycles: &[CycleSpec],
        k: usize,
        acc: &mut Vec<CycleFlag>,
        out: &mut Vec<Vec<CycleFlag>>,
    ) {
        if k == cycles.len() {
            out.push(acc.clone());
            return;
        }
        let b = cycles[k].multiplicity;
        let cands = candidates(supply, b);
        let mut choices = Vec::new();
        fill_cycle(&cands, 0, cycles[k].rank, &mut Vec::new(), &mut choices);
        for choice in choices {
            for (d, lambda) in &choice {
                for w in cycle_weights(lambda, b) {
                    *supply.get_mut(&w).expect("capped by candidates") -= d;
                }
            }
            supply.retain(|_, units| *units > 0);
            acc.push(choice.clone());
            search(supply, cycles, k + 1, acc, out);
            acc.pop();
            for (d, lambda) in &choice {
                for w in cycle_weights(lambda, b) {
                    *supply.entry(w).or_insert(0) += d;
                }
            }
        }
    }

    let mut supply = supply.clone();
    supply.retain(|_, units| *units > 0);
    let mut out = Vec::new();
    search(&mut supply, cycles, 0, &mut Vec::new(), &mut out);
    out.sort();
    out.dedup();
    out
}

/// The search state shared by `reconstruct` and the round-trip verifiers:
/// the rebuilt covering plus, per marked point, every admissible assignment.
struct ReconstructionSearch {
    covering: CoveringMonodromy,
    component_ranks: Vec<usize>,
    component_degrees: Vec<i64>,
    /// per marked point: its cycle structure and all assignments, sorted
    points: Vec<(String, Vec<CycleSpec>, Vec<Vec<CycleFlag>>)>,
}

impl ReconstructionSearch {
    fn run(
        base: &MarkedCurve,
        bundle: &ParabolicBundle,
        torus: &RamifiedTorusData,
    ) -> Result<Self> {
        if bundle.components().len() != 1 {
            return Err(Error::RankMismatch(
                "the bundle downstairs must live on a connected curve".into(),
            ));
        }
        let rank = bundle.components()[0].rank;
        if torus.total_rank() != rank {
            return Err(Error::RankMismatch(format!(
                "block ranks sum to {} but the bundle has rank {rank}",
                torus.total_rank()
            )));
        }
        for fp in bundle.flags() {
            if !base.is_marked(&fp.label) {
                return Err(Error::FlagOverUnmarkedPoint(fp.label.clone()));
            }
        }

        let covering = torus.to_covering(base)?;
        let report = covering.validate();
        if !report.is_valid() {
            return Err(Error::NoConsistentAssignment(format!(
                "block monodromy is not a covering: {}",
                report.violations.join("; ")
            )));
        }
        let components = covering.components()?;
        let component_ranks: Vec<usize> = components
            .iter()
            .map(|c| torus.block_ranks()[c.sheets[0]])
            .collect();

        // underlying degrees: the Euler characteristic upstairs is pinned by
        // the direct-image degree formula; its split across components is
        // not visible in the data, so it is distributed canonically.
        let chi_total = bundle.components()[0].degree + rank as i64 * (1 - base.genus() as i64);
        let k = components.len() as i64;
        let q = chi_total.div_euclid(k);
        let rem = chi_total.rem_euclid(k);
        let component_degrees: Vec<i64> = components
            .iter()
            .enumerate()
            .map(|(i, comp)| {
                let chi = q + if (i as i64) < rem { 1 } else { 0 };
                chi - component_ranks[i] as i64 * (1 - comp.genus as i64)
            })
            .collect();

        let mut points = Vec::new();
        for label in base.marked_points() {
            let flag = bundle.effective_flag(label, 0);
            let mut supply: BTreeMap<Rational, usize> = BTreeMap::new();
            for step in flag.steps() {
                supply.insert(step.weight.clone(), step.dim);
            }
            let cycles: Vec<CycleSpec> = covering
                .ramification_profile(label)?
                .into_iter()
                .map(|cycle| {
                    let sheet = cycle.sheets[0];
                    let component = components
                        .iter()
                        .position(|c| c.contains(sheet))
                        .expect("sheet below degree");
                    CycleSpec {
                        point: YPoint { component, base: label.clone(), sheet },
                        multiplicity: cycle.multiplicity,
                        rank: component_ranks[component],
                    }
                })
                .collect();
            let assignments = enumerate_point_assignments(&supply, &cycles);
            if assignments.is_empty() {
                return Err(Error::NoConsistentAssignment(format!(
                    "the weight pieces at {label} ({flag}) admit no splitting along the fiber"
                )));
            }
            points.push((label.clone(), cycles, assignments));
        }
        Ok(ReconstructionSearch { covering, component_ranks, component_degrees, points })
    }

    fn choice_counts(&self) -> Vec<usize> {
        self.points.iter().map(|(_, _, a)| a.len()).collect()
    }

    fn ambiguous(&self) -> bool {
        self.points.iter().any(|(_, _, a)| a.len() > 1)
    }

    /// Assemble the result for one choice of assignment per marked point.
    fn build(&self, choice: &[usize]) -> Result<ReconstructionResult> {
        let mut flags: Vec<FlaggedPoint> = Vec::new();
        let mut assignment = Vec::new();
        for ((label, cycles, assignments), &pick) in self.points.iter().zip(choice) {
            let solution = &assignments[pick];
            for (spec, cycle_flag) in cycles.iter().zip(solution) {
                let steps: Vec<FlagStep> = cycle_flag
                    .iter()
                    .map(|(dim, weight)| FlagStep { dim: *dim, weight: weight.clone() })
                    .collect();
                let flag = WeightedFlag::new(steps)?;
                for (dim, lambda) in cycle_flag {
                    for level in 0..spec.multiplicity {
                        let downstairs_weight = (Rational::int(level as i64) + lambda.clone())
                            .checked_div(&Rational::int(spec.multiplicity as i64))?;
                        assignment.push(AssignmentRecord {
                            base_point: label.clone(),
                            downstairs_weight,
                            dim: *dim,
                            point: spec.point.clone(),
                            level,
                            upstairs_weight: lambda.clone(),
                        });
                    }
                }
                if !flag.is_trivial() {
                    flags.push(FlaggedPoint {
                        label: spec.point.label(),
                        component: spec.point.component,
                        flag,
                    });
                }
            }
        }
        let components: Vec<BundleComponent> = self
            .component_ranks
            .iter()
            .zip(&self.component_degrees)
            .map(|(&rank, &degree)| BundleComponent { rank, degree })
            .collect();
        let bundle = ParabolicBundle::new(components, flags)?;
        let upstairs = UpstairsBundle::new(self.covering.clone(), bundle)?;
        Ok(ReconstructionResult {
            covering: self.covering.clone(),
            upstairs,
            assignment,
            ambiguous: self.ambiguous(),
        })
    }
}

/// Rebuild a covering and a bundle upstairs from a parabolic bundle and a
/// ramified torus datum, such that the direct image of the result is the
/// input bundle. When several assignments exist, the lexicographically least
/// is returned and the result is marked ambiguous.
pub fn reconstruct(
    base: &MarkedCurve,
    bundle: &ParabolicBundle,
    torus: &RamifiedTorusData,
) -> Result<ReconstructionResult> {
    let search = ReconstructionSearch::run(base, bundle, torus)?;
    let choice = vec![0usize; search.points.len()];
    let rec = search.build(&choice)?;
    let pushed = rec.upstairs.push_forward()?;
    if !pushed.equivalent(bundle) {
        return Err(Error::NoConsistentAssignment(
            "reconstructed bundle does not push forward to the input".into(),
        ));
    }
    Ok(rec)
}

/// Transfer residue data downstairs to the reconstructed bundle upstairs.
/// For each upstairs flag step the downstairs eigenvalues `rho_c` at
/// weights `(c + lambda) / b` must satisfy `rho_c = (tau + c) / b` for a
/// single `tau`; otherwise the connection does not preserve the torus.
pub fn induce_connection(
    bundle: &ParabolicBundle,
    residues: &ResidueData,
    rec: &ReconstructionResult,
) -> Result<ResidueData> {
    residues.check_alignment(bundle)?;
    let mut entries = Vec::new();
    for label in rec.covering.base().marked_points() {
        let flag = bundle.effective_flag(label, 0);
        let eigen = residues.eigenvalues_for(bundle, label, 0);
        let rho: BTreeMap<Rational, Rational> = flag
            .steps()
            .iter()
            .zip(&eigen)
            .map(|(step, ev)| (step.weight.clone(), ev.clone()))
            .collect();

        for fiber in rec.upstairs.fiber_points(label)? {
            let b = fiber.multiplicity;
            let point_label = fiber.point.label();
            let up_flag = rec.upstairs.bundle().effective_flag(&point_label, fiber.point.component);
            let mut taus = Vec::new();
            for step in up_flag.steps() {
                let mut tau: Option<Rational> = None;
                for level in 0..b {
                    let weight = (Rational::int(level as i64) + step.weight.clone())
                        .checked_div(&Rational::int(b as i64))?;
                    let rho_c = rho.get(&weight).ok_or_else(|| {
                        Error::MisalignedResidues(format!(
                            "no downstairs eigenvalue at {label} for weight {weight}"
                        ))
                    })?;
                    let candidate = rho_c.scale(b as i64) - Rational::int(level as i64);
                    match &tau {
                        None => tau = Some(candidate),
                        Some(t) if *t != candidate => {
                            return Err(Error::NotTorusPreserving(format!(
                                "at {point_label}: levels give residues {t} and {candidate}"
                            )));
                        }
                        Some(_) => {}
                    }
                }
                taus.push(tau.expect("b >= 1"));
            }
            if taus.iter().any(|t| !t.is_zero()) {
                entries.push(ResidueEntry {
                    label: point_label,
                    component: fiber.point.component,
                    eigenvalues: taus,
                });
            }
        }
    }
    let induced = ResidueData::new(entries)?;
    let pushed_back = rec.upstairs.push_forward_residues(&induced)?;
    if !pushed_back.equivalent(residues) {
        return Err(Error::MisalignedResidues(
            "induced connection does not push back to the input residues".into(),
        ));
    }
    Ok(induced)
}

/// The label and component relabelling of upstairs points induced by a sheet
/// relabelling `pi` with `target = pi . source . pi^-1`.
fn map_point(
    source: &YPoint,
    target: &UpstairsBundle,
    pi: &Permutation,
) -> YPoint {
    let image = pi.apply(source.sheet);
    let cycle = target
        .covering()
        .branch_perm(&source.base)
        .expect("marked point")
        .cycle_containing(image);
    let sheet = cycle[0];
    let component = target
        .components()
        .iter()
        .position(|c| c.contains(sheet))
        .expect("sheet below degree");
    YPoint { component, base: source.base.clone(), sheet }
}

/// Does relabelling `rec.upstairs` by `pi` give exactly `u`'s bundle?
fn bundle_matches(rec: &ReconstructionResult, u: &UpstairsBundle, pi: &Permutation) -> bool {
    // component data must map across: compare rank and degree componentwise
    for (c, comp) in rec.upstairs.components().iter().enumerate() {
        let image_sheet = pi.apply(comp.sheets[0]);
        let j = u
            .components()
            .iter()
            .position(|k| k.contains(image_sheet))
            .expect("sheet below degree");
        if rec.upstairs.bundle().components()[c] != u.bundle().components()[j]
            || comp.genus != u.components()[j].genus
        {
            return false;
        }
    }
    let mut relabeled: Vec<(String, WeightedFlag)> = rec
        .upstairs
        .bundle()
        .normalized()
        .flags()
        .iter()
        .map(|fp| {
            let source = YPoint::parse(&fp.label).expect("canonical labels upstairs");
            (map_point(&source, u, pi).label(), fp.flag.clone())
        })
        .collect();
    relabeled.sort();
    let expected: Vec<(String, WeightedFlag)> = u
        .bundle()
        .normalized()
        .flags()
        .iter()
        .map(|fp| (fp.label.clone(), fp.flag.clone()))
        .collect();
    relabeled == expected
}

/// Iterate over all reconstructions of `push_forward(u)` from its canonical
/// torus and all sheet relabellings matching `u`'s covering; `accept` closes
/// the loop (eg. by comparing connections). Returns whether any pair was
/// accepted.
fn roundtrip_search(
    u: &UpstairsBundle,
    mut accept: impl FnMut(&ReconstructionResult, &Permutation) -> Result<bool>,
) -> Result<bool> {
    let pushed = u.push_forward()?;
    let torus = torus_from_direct_image(u);
    let search = ReconstructionSearch::run(u.covering().base(), &pushed, &torus)?;

    let rank_of_sheet = |bundle: &UpstairsBundle, sheet: usize| -> usize {
        let comp = bundle
            .components()
            .iter()
            .position(|c| c.contains(sheet))
            .expect("sheet below degree");
        bundle.bundle().components()[comp].rank
    };

    let counts = search.choice_counts();
    let mut choice = vec![0usize; counts.len()];
    loop {
        let rec = search.build(&choice)?;
        if rec.upstairs.push_forward()?.equivalent(&pushed) {
            let mut outcome: Result<bool> = Ok(false);
            rec.covering.visit_conjugations(
                u.covering(),
                &|x, y| rank_of_sheet(&rec.upstairs, x) == rank_of_sheet(u, y),
                &mut |pi| {
                    if !bundle_matches(&rec, u, pi) {
                        return false;
                    }
                    match accept(&rec, pi) {
                        Ok(true) => {
                            outcome = Ok(true);
                            true
                        }
                        Ok(false) => false,
                        Err(e) => {
                            outcome = Err(e);
                            true
                        }
                    }
                },
            );
            match outcome {
                Ok(true) => return Ok(true),
                Err(e) => return Err(e),
                Ok(false) => {}
            }
        }
        // next choice vector
        let mut i = 0;
        loop {
            if i == counts.len() {
                return Ok(false);
            }
            choice[i] += 1;
            if choice[i] < counts[i] {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Executable form of the equivalence between coverings-with-bundles and
/// torus data: push forward, take the canonical torus, reconstruct, and
/// compare with the original up to a sheet relabelling.
pub fn verify_roundtrip_covering(u: &UpstairsBundle) -> Result<bool> {
    roundtrip_search(u, |_, _| Ok(true))
}

/// Round trip for connections: push the residues down, reconstruct, induce
/// the connection back up and compare with the original after relabelling.
pub fn verify_roundtrip_connection(u: &UpstairsBundle, residues: &ResidueData) -> Result<bool> {
    u.validate_residues(residues)?;
    let pushed = u.push_forward()?;
    let down = u.push_forward_residues(residues)?;
    roundtrip_search(u, |rec, pi| {
        let induced = match induce_connection(&pushed, &down, rec) {
            Ok(r) => r,
            Err(Error::NotTorusPreserving(_)) => return Ok(false),
            Err(e) => return Err(e),
        };
        let relabeled = ResidueData::new(
            induced
                .entries()
                .iter()
                .map(|entry| {
                    let source = YPoint::parse(&entry.label).expect("canonical labels upstairs");
                    let target = map_point(&source, u, pi);
                    ResidueEntry {
                        label: target.label(),
                        component: target.component,
                        eigenvalues: entry.eigenvalues.clone(),
                    }
                })
                .collect(),
        )?;
        Ok(relabeled.equivalent(residues))
    })
}
