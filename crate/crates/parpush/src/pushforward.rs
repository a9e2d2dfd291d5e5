//! Direct image of a parabolic bundle, and of its residue data, under a
//! branched covering.
//!
//! At a marked point `x` the direct-image fiber splits into one block per
//! point of the fiber upstairs. A point with multiplicity `b` and flag steps
//! `(d, lambda)` contributes, for every level `c` in `0..b`, a piece of
//! dimension `d` with weight `(c + lambda) / b`; a residue eigenvalue `tau`
//! on that step moves to `(tau + c) / b`. Pieces of equal weight are merged
//! by summing dimensions.

use crate::error::{Error, Result};
use crate::hurwitz::{CoverComponent, CoveringMonodromy, YPoint};
use crate::parabolic::{
    is_parabolic_connection, FlagStep, ParabolicBundle, ResidueData, ResidueEntry, WeightedFlag,
};
use crate::rational::Rational;

/// A parabolic bundle on the total space of a covering. Flags are keyed by
/// the canonical names of the fiber points; each must lie over a marked
/// point of the base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpstairsBundle {
    covering: CoveringMonodromy,
    components: Vec<CoverComponent>,
    bundle: ParabolicBundle,
}

/// One point of a fiber upstairs together with its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberPoint {
    pub point: YPoint,
    pub sheets: Vec<usize>,
    pub multiplicity: usize,
}

/// A weighted piece contributed by one level of one fiber point, before the
/// merge across the fiber.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushedPiece {
    pub level: usize,
    pub dim: usize,
    pub weight: Rational,
    pub eigenvalue: Option<Rational>,
}

/// All pieces contributed by a single fiber point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclePieces {
    pub point: YPoint,
    pub multiplicity: usize,
    pub pieces: Vec<PushedPiece>,
}

impl UpstairsBundle {
    pub fn new(covering: CoveringMonodromy, bundle: ParabolicBundle) -> Result<Self> {
        let report = covering.validate();
        if !report.is_valid() {
            return Err(Error::InvalidCovering(report.violations.join("; ")));
        }
        let components = covering.components()?;
        if bundle.components().len() != components.len() {
            return Err(Error::RankMismatch(format!(
                "bundle has {} components but the covering has {}",
                bundle.components().len(),
                components.len()
            )));
        }
        let u = UpstairsBundle { covering, components, bundle };
        for fp in u.bundle.flags() {
            u.resolve_point(&fp.label, fp.component)?;
        }
        Ok(u)
    }

    /// Checks that `label` names an actual fiber point over a marked base
    /// point, lying on `component`.
    fn resolve_point(&self, label: &str, component: usize) -> Result<YPoint> {
        let point = YPoint::parse(label)?;
        if !self.covering.base().is_marked(&point.base) {
            return Err(Error::FlagOverUnmarkedPoint(format!(
                "{label} lies over {:?}, which is not a marked point",
                point.base
            )));
        }
        let cycle = self.covering.branch_perm(&point.base)?.cycle_containing(point.sheet);
        if cycle[0] != point.sheet {
            return Err(Error::UnknownPoint(format!(
                "{label}: sheet {} is not the least sheet of its cycle",
                point.sheet + 1
            )));
        }
        let comp = self
            .components
            .iter()
            .position(|c| c.contains(point.sheet))
            .expect("sheet below degree");
        if comp != point.component || component != comp {
            return Err(Error::UnknownPoint(format!(
                "{label}: point lies on component {comp}"
            )));
        }
        Ok(point)
    }

    pub fn covering(&self) -> &CoveringMonodromy {
        &self.covering
    }

    pub fn components(&self) -> &[CoverComponent] {
        &self.components
    }

    pub fn bundle(&self) -> &ParabolicBundle {
        &self.bundle
    }

    /// The fiber over a marked point: one entry per cycle of the branch
    /// permutation, ordered by least sheet.
    pub fn fiber_points(&self, label: &str) -> Result<Vec<FiberPoint>> {
        let profile = self.covering.ramification_profile(label)?;
        Ok(profile
            .into_iter()
            .map(|cycle| {
                let sheet = cycle.sheets[0];
                let component = self
                    .components
                    .iter()
                    .position(|c| c.contains(sheet))
                    .expect("sheet below degree");
                FiberPoint {
                    point: YPoint { component, base: label.to_string(), sheet },
                    multiplicity: cycle.multiplicity,
                    sheets: cycle.sheets,
                }
            })
            .collect())
    }

    /// Per-cycle weighted pieces over `label`, before the merge. With
    /// residue data, each piece also carries its pushed eigenvalue.
    pub fn cycle_pieces(
        &self,
        label: &str,
        residues: Option<&ResidueData>,
    ) -> Result<Vec<CyclePieces>> {
        let mut out = Vec::new();
        for fiber in self.fiber_points(label)? {
            let point_label = fiber.point.label();
            let flag = self.bundle.effective_flag(&point_label, fiber.point.component);
            let eigen = residues
                .map(|r| r.eigenvalues_for(&self.bundle, &point_label, fiber.point.component));
            let pieces =
                pushed_pieces(&flag, eigen.as_deref(), fiber.multiplicity).expect("b >= 1");
            out.push(CyclePieces { point: fiber.point, multiplicity: fiber.multiplicity, pieces });
        }
        Ok(out)
    }

    /// The direct-image parabolic bundle on the base. Points whose merged
    /// flag is trivial are omitted unless `keep_trivial` is set.
    pub fn push_forward_with(&self, keep_trivial: bool) -> Result<ParabolicBundle> {
        let rank: usize = self
            .components
            .iter()
            .zip(self.bundle.components())
            .map(|(cover, bc)| cover.local_degree() * bc.rank)
            .sum();
        let degree = self.push_forward_degree();

        let mut flags = Vec::new();
        for label in self.covering.base().marked_points() {
            let mut merged: Vec<(Rational, usize)> = Vec::new();
            for cycle in self.cycle_pieces(label, None)? {
                for piece in cycle.pieces {
                    merged.push((piece.weight, piece.dim));
                }
            }
            merged.sort_by(|a, b| a.0.cmp(&b.0));
            let mut steps: Vec<FlagStep> = Vec::new();
            for (weight, dim) in merged {
                match steps.last_mut() {
                    Some(last) if last.weight == weight => last.dim += dim,
                    _ => steps.push(FlagStep { dim, weight }),
                }
            }
            let flag = WeightedFlag::new(steps)?;
            if keep_trivial || !flag.is_trivial() {
                flags.push((label.clone(), flag));
            }
        }
        ParabolicBundle::on_connected(rank, degree, flags)
    }

    pub fn push_forward(&self) -> Result<ParabolicBundle> {
        self.push_forward_with(false)
    }

    /// Degree of the underlying direct image, fixed by preservation of the
    /// Euler characteristic under a finite morphism:
    /// `chi(Y, V) = sum_c [deg V_c + r_c (1 - g_c)]` equals
    /// `deg + rank (1 - g_X)` downstairs.
    fn push_forward_degree(&self) -> i64 {
        let chi_up: i64 = self
            .components
            .iter()
            .zip(self.bundle.components())
            .map(|(cover, bc)| bc.degree + bc.rank as i64 * (1 - cover.genus as i64))
            .sum();
        let rank: i64 = self
            .components
            .iter()
            .zip(self.bundle.components())
            .map(|(cover, bc)| (cover.local_degree() * bc.rank) as i64)
            .sum();
        chi_up - rank * (1 - self.covering.base().genus() as i64)
    }

    /// Residue data of the induced logarithmic connection downstairs.
    /// Fails with `MergeConflict` when two weight-equal pieces carry
    /// different eigenvalues (the merged residue would not be scalar on
    /// that graded piece).
    pub fn push_forward_residues(&self, residues: &ResidueData) -> Result<ResidueData> {
        self.validate_residues(residues)?;
        let mut entries = Vec::new();
        for label in self.covering.base().marked_points() {
            // stable sort by weight keeps the canonical (cycle, level) order
            // among equal weights
            let mut pieces: Vec<PushedPiece> = self
                .cycle_pieces(label, Some(residues))?
                .into_iter()
                .flat_map(|c| c.pieces)
                .collect();
            pieces.sort_by(|a, b| a.weight.cmp(&b.weight));

            let mut eigenvalues: Vec<Rational> = Vec::new();
            let mut weights: Vec<Rational> = Vec::new();
            for piece in pieces {
                let ev = piece.eigenvalue.expect("residues supplied");
                match weights.last() {
                    Some(w) if *w == piece.weight => {
                        let prev = eigenvalues.last().expect("parallel to weights");
                        if *prev != ev {
                            return Err(Error::MergeConflict(format!(
                                "at {label}, weight {} carries eigenvalues {prev} and {ev}",
                                piece.weight
                            )));
                        }
                    }
                    _ => {
                        weights.push(piece.weight);
                        eigenvalues.push(ev);
                    }
                }
            }
            if eigenvalues.iter().any(|ev| !ev.is_zero()) {
                entries.push(ResidueEntry { label: label.clone(), component: 0, eigenvalues });
            }
        }
        ResidueData::new(entries)
    }

    /// Residue entries must sit at actual fiber points over marked base
    /// points, in the shape of the flags there.
    pub fn validate_residues(&self, residues: &ResidueData) -> Result<()> {
        residues.check_alignment(&self.bundle)?;
        for entry in residues.entries() {
            self.resolve_point(&entry.label, entry.component)?;
        }
        Ok(())
    }

    /// Executable form of the statement that direct images of parabolic
    /// connections are parabolic: pushes the pair forward and re-checks the
    /// defining property. Callers supply parabolic residue data upstairs.
    pub fn verify_parabolicity(&self, residues: &ResidueData) -> Result<bool> {
        let pushed = self.push_forward()?;
        let pushed_residues = self.push_forward_residues(residues)?;
        is_parabolic_connection(&pushed, &pushed_residues)
    }
}

/// The pieces contributed by a single fiber point of multiplicity `b`
/// carrying `flag` (and optionally one residue eigenvalue per flag step):
/// for every level `c` and step `(d, lambda)`, dimension `d` at weight
/// `(c + lambda) / b`, eigenvalue `(tau + c) / b`.
pub fn pushed_pieces(
    flag: &WeightedFlag,
    eigenvalues: Option<&[Rational]>,
    b: usize,
) -> Result<Vec<PushedPiece>> {
    if b == 0 {
        return Err(Error::OutOfRange("multiplicity must be positive".into()));
    }
    if let Some(eigen) = eigenvalues {
        if eigen.len() != flag.steps().len() {
            return Err(Error::MisalignedResidues(format!(
                "{} eigenvalues for {} flag steps",
                eigen.len(),
                flag.steps().len()
            )));
        }
    }
    let b_rat = Rational::int(b as i64);
    let mut pieces = Vec::new();
    for level in 0..b {
        let level_rat = Rational::int(level as i64);
        for (k, step) in flag.steps().iter().enumerate() {
            let weight = (&level_rat + &step.weight).checked_div(&b_rat)?;
            let eigenvalue = eigenvalues
                .map(|eigen| (&level_rat + &eigen[k]).checked_div(&b_rat))
                .transpose()?;
            pieces.push(PushedPiece { level, dim: step.dim, weight, eigenvalue });
        }
    }
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hurwitz::{MarkedCurve, Permutation};
    use crate::oracle;
    use crate::parabolic::{ohtsuki_check, parabolic_residues};
    use std::collections::BTreeMap;

    fn rat(p: i64, q: i64) -> Rational {
        Rational::of(p, q)
    }

    fn sphere(points: &[&str]) -> MarkedCurve {
        MarkedCurve::new(0, points.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn flag(steps: &[(usize, (i64, i64))]) -> WeightedFlag {
        WeightedFlag::new(
            steps.iter().map(|&(dim, (p, q))| FlagStep { dim, weight: rat(p, q) }).collect(),
        )
        .unwrap()
    }

    /// z -> z^2 on the sphere, both marked points branched.
    pub(crate) fn squaring_cover() -> CoveringMonodromy {
        let mut branch = BTreeMap::new();
        let swap = Permutation::from_cycles(2, &[vec![1, 2]]).unwrap();
        branch.insert("z0".to_string(), swap.clone());
        branch.insert("zinf".to_string(), swap);
        CoveringMonodromy::new(sphere(&["z0", "zinf"]), 2, vec![], branch).unwrap()
    }

    fn squaring_of_trivial_line() -> UpstairsBundle {
        let bundle = ParabolicBundle::on_connected(1, 0, vec![]).unwrap();
        UpstairsBundle::new(squaring_cover(), bundle).unwrap()
    }

    #[test]
    fn identity_covering_is_passthrough() {
        let base = sphere(&["x", "y"]);
        let covering = CoveringMonodromy::identity_cover(base);
        let f = flag(&[(1, (0, 1)), (2, (1, 3))]);
        let bundle =
            ParabolicBundle::on_connected(3, 2, vec![("c0:x:s1".into(), f.clone())]).unwrap();
        let u = UpstairsBundle::new(covering, bundle).unwrap();
        let pushed = u.push_forward().unwrap();
        assert_eq!(pushed.components()[0].rank, 3);
        assert_eq!(pushed.components()[0].degree, 2);
        assert_eq!(pushed.flags().len(), 1);
        assert_eq!(pushed.flags()[0].label, "x");
        assert_eq!(pushed.flags()[0].flag, f);
    }

    #[test]
    fn triple_point_with_quarter_weight() {
        let mut branch = BTreeMap::new();
        branch.insert("a".to_string(), Permutation::from_cycles(3, &[vec![1, 2, 3]]).unwrap());
        branch.insert("b".to_string(), Permutation::from_cycles(3, &[vec![1, 3, 2]]).unwrap());
        let covering = CoveringMonodromy::new(sphere(&["a", "b"]), 3, vec![], branch).unwrap();
        let bundle =
            ParabolicBundle::on_connected(1, 0, vec![("c0:a:s1".into(), flag(&[(1, (1, 4))]))])
                .unwrap();
        let u = UpstairsBundle::new(covering, bundle).unwrap();
        let pushed = u.push_forward().unwrap();
        let fa = &pushed.flag_at("a").unwrap().flag;
        let expected: Vec<FlagStep> = [(1, 12), (5, 12), (3, 4)]
            .iter()
            .map(|&(p, q)| FlagStep { dim: 1, weight: rat(p, q) })
            .collect();
        assert_eq!(fa.steps(), &expected[..]);
    }

    #[test]
    fn squaring_benchmark_bundle() {
        let u = squaring_of_trivial_line();
        let pushed = u.push_forward().unwrap();
        assert_eq!(pushed.components()[0].rank, 2);
        assert_eq!(pushed.components()[0].degree, -1);
        for label in ["z0", "zinf"] {
            let f = &pushed.flag_at(label).unwrap().flag;
            assert_eq!(
                f.steps(),
                &[
                    FlagStep { dim: 1, weight: Rational::zero() },
                    FlagStep { dim: 1, weight: rat(1, 2) },
                ]
            );
        }
        assert!(pushed.par_deg().is_zero());
        assert_eq!(pushed.par_deg(), u.bundle().par_deg());
    }

    #[test]
    fn squaring_benchmark_residues() {
        let u = squaring_of_trivial_line();
        let pushed = u.push_forward().unwrap();
        let down = u.push_forward_residues(&ResidueData::empty()).unwrap();
        for label in ["z0", "zinf"] {
            let entry = down.entry_at(label).unwrap();
            assert_eq!(entry.eigenvalues, vec![Rational::zero(), rat(1, 2)]);
        }
        assert!(ohtsuki_check(&pushed, &down).unwrap());
        assert!(u.verify_parabolicity(&ResidueData::empty()).unwrap());
    }

    #[test]
    fn etale_residues_pass_through() {
        let base = sphere(&["x", "y"]);
        let covering = CoveringMonodromy::identity_cover(base);
        let bundle =
            ParabolicBundle::on_connected(2, 0, vec![("c0:x:s1".into(), flag(&[(2, (1, 3))]))])
                .unwrap();
        let u = UpstairsBundle::new(covering, bundle).unwrap();
        let up = parabolic_residues(u.bundle());
        let down = u.push_forward_residues(&up).unwrap();
        assert_eq!(down.entry_at("x").unwrap().eigenvalues, vec![rat(1, 3)]);
        assert!(u.verify_parabolicity(&up).unwrap());
    }

    #[test]
    fn keep_trivial_retains_unramified_points() {
        let base = sphere(&["x"]);
        let covering = CoveringMonodromy::identity_cover(base);
        let bundle = ParabolicBundle::on_connected(2, 0, vec![]).unwrap();
        let u = UpstairsBundle::new(covering, bundle).unwrap();
        assert!(u.push_forward().unwrap().flags().is_empty());
        let kept = u.push_forward_with(true).unwrap();
        assert_eq!(kept.flags().len(), 1);
        assert!(kept.flags()[0].flag.is_trivial());
    }

    #[test]
    fn flag_over_unmarked_point_rejected() {
        let covering = squaring_cover();
        let bundle =
            ParabolicBundle::on_connected(1, 0, vec![("c0:w:s1".into(), flag(&[(1, (1, 2))]))])
                .unwrap();
        assert!(matches!(
            UpstairsBundle::new(covering, bundle),
            Err(Error::FlagOverUnmarkedPoint(_))
        ));
    }

    #[test]
    fn invalid_covering_rejected() {
        let mut branch = BTreeMap::new();
        branch.insert("a".to_string(), Permutation::from_cycles(2, &[vec![1, 2]]).unwrap());
        let covering = CoveringMonodromy::new(sphere(&["a"]), 2, vec![], branch).unwrap();
        let bundle = ParabolicBundle::on_connected(1, 0, vec![]).unwrap();
        assert!(matches!(UpstairsBundle::new(covering, bundle), Err(Error::InvalidCovering(_))));
    }

    #[test]
    fn merge_conflict_on_nonscalar_merge() {
        // two unramified preimages with different residues over the same
        // point: the pushed residue is not scalar on the weight-0 piece
        let base = sphere(&["x"]);
        let covering = CoveringMonodromy::new(base, 2, vec![], BTreeMap::new()).unwrap();
        let bundle = ParabolicBundle::new(
            vec![
                crate::parabolic::BundleComponent { rank: 1, degree: 0 },
                crate::parabolic::BundleComponent { rank: 1, degree: 0 },
            ],
            vec![],
        )
        .unwrap();
        let u = UpstairsBundle::new(covering, bundle).unwrap();
        let res = ResidueData::new(vec![
            ResidueEntry { label: "c0:x:s1".into(), component: 0, eigenvalues: vec![rat(1, 3)] },
            ResidueEntry { label: "c1:x:s2".into(), component: 1, eigenvalues: vec![rat(1, 4)] },
        ])
        .unwrap();
        assert!(matches!(u.push_forward_residues(&res), Err(Error::MergeConflict(_))));
    }

    #[test]
    fn per_cycle_pieces_are_shifted_weights() {
        // the multiset of weights at level c is the flag multiset shifted by
        // c and divided by b
        let f = flag(&[(2, (1, 4)), (1, (2, 3))]);
        for b in 1..=4usize {
            let pieces = pushed_pieces(&f, None, b).unwrap();
            for c in 0..b {
                let mut got: Vec<Rational> = pieces
                    .iter()
                    .filter(|p| p.level == c)
                    .flat_map(|p| std::iter::repeat_n(p.weight.clone(), p.dim))
                    .collect();
                got.sort();
                let mut want: Vec<Rational> = f
                    .steps()
                    .iter()
                    .flat_map(|s| {
                        std::iter::repeat_n((Rational::int(c as i64) + s.weight.clone())
                                .checked_div(&Rational::int(b as i64))
                                .unwrap(), s.dim)
                    })
                    .collect();
                want.sort();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn per_cycle_pieces_match_oracle() {
        let f = flag(&[(1, (0, 1)), (2, (1, 3))]);
        for b in 1..=4usize {
            let pieces = pushed_pieces(&f, None, b).unwrap();
            let levels = oracle::oracle_filtration_dims(f.rank(), b, &f).unwrap();
            for level in levels {
                let got: Vec<(usize, Rational)> = pieces
                    .iter()
                    .filter(|p| p.level == level.level)
                    .map(|p| (p.dim, p.weight.clone()))
                    .collect();
                assert_eq!(got, level.steps);
            }
        }
    }

    #[test]
    fn residue_pieces_match_oracle_spectrum() {
        for b in 1..=4usize {
            for (p, q) in [(0, 1), (1, 2), (-2, 3), (5, 6)] {
                let tau = rat(p, q);
                let f = WeightedFlag::trivial(1);
                let pieces = pushed_pieces(&f, Some(std::slice::from_ref(&tau)), b).unwrap();
                let spectrum: Vec<Rational> =
                    pieces.iter().map(|p| p.eigenvalue.clone().unwrap()).collect();
                let model = oracle::LaurentModel::scalar(tau, oracle::DEFAULT_PRECISION);
                let pushed = oracle::oracle_pushforward(&model, b).unwrap();
                assert!(pushed.spectrum_matches(&spectrum));
            }
        }
    }
}
