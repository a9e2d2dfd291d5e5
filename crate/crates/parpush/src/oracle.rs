//! Brute-force local models for direct images of logarithmic connections.
//!
//! A bundle with connection near a point is modelled as `D = d + A(w) dw/w`
//! with `A` a matrix of truncated series in the local coordinate `w`. Pushing
//! through `t = w^b` is carried out symbolically in the monomial basis
//! `{w^c e_j : 0 <= c < b}`, so the residue downstairs is *derived* rather
//! than asserted; the direct-image module is checked against it.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::parabolic::WeightedFlag;
use crate::rational::Rational;

pub const DEFAULT_PRECISION: i64 = 16;

/// A truncated Laurent series: coefficients for exponents below `trunc`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaurentSeries {
    coeffs: BTreeMap<i64, Rational>,
    trunc: i64,
}

impl LaurentSeries {
    pub fn zero(trunc: i64) -> Self {
        LaurentSeries { coeffs: BTreeMap::new(), trunc }
    }

    pub fn constant(value: Rational, trunc: i64) -> Self {
        Self::monomial(0, value, trunc)
    }

    pub fn monomial(exp: i64, coeff: Rational, trunc: i64) -> Self {
        let mut s = Self::zero(trunc);
        s.add_term(exp, coeff);
        s
    }

    pub fn truncation(&self) -> i64 {
        self.trunc
    }

    pub fn coeff(&self, exp: i64) -> Rational {
        self.coeffs.get(&exp).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, exp: i64, coeff: Rational) {
        if coeff.is_zero() || exp >= self.trunc {
            return;
        }
        let entry = self.coeffs.entry(exp).or_insert_with(Rational::zero);
        *entry = entry.clone() + coeff;
        if entry.is_zero() {
            self.coeffs.remove(&exp);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &Rational)> {
        self.coeffs.iter().map(|(&e, c)| (e, c))
    }

    pub fn valuation(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &LaurentSeries) -> LaurentSeries {
        let mut out = LaurentSeries::zero(self.trunc.min(other.trunc));
        for (e, c) in self.terms().chain(other.terms()) {
            out.add_term(e, c.clone());
        }
        out
    }

    pub fn scale(&self, factor: &Rational) -> LaurentSeries {
        let mut out = LaurentSeries::zero(self.trunc);
        for (e, c) in self.terms() {
            out.add_term(e, c * factor);
        }
        out
    }

    /// Substitute `w -> w^delta`.
    pub fn substitute_power(&self, delta: i64) -> LaurentSeries {
        assert!(delta >= 1);
        let mut out = LaurentSeries::zero(self.trunc * delta);
        for (e, c) in self.terms() {
            out.add_term(e * delta, c.clone());
        }
        out
    }
}

/// Local model of a bundle with logarithmic connection: `D = d + A(w) dw/w`
/// with `A` holomorphic (the pole is carried by `dw/w`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaurentModel {
    rank: usize,
    precision: i64,
    matrix: Vec<Vec<LaurentSeries>>,
}

impl LaurentModel {
    pub fn new(rank: usize, precision: i64, matrix: Vec<Vec<LaurentSeries>>) -> Result<Self> {
        if rank == 0 || precision < 1 {
            return Err(Error::OutOfRange("rank and precision must be positive".into()));
        }
        if matrix.len() != rank || matrix.iter().any(|row| row.len() != rank) {
            return Err(Error::RankMismatch(format!("connection matrix must be {rank}x{rank}")));
        }
        for row in &matrix {
            for entry in row {
                if let Some(v) = entry.valuation() {
                    if v < 0 {
                        return Err(Error::OutOfRange(
                            "connection matrix entries must be holomorphic".into(),
                        ));
                    }
                }
            }
        }
        Ok(LaurentModel { rank, precision, matrix })
    }

    /// Rank-one model with constant residue `tau`.
    pub fn scalar(tau: Rational, precision: i64) -> Self {
        Self::diagonal(&[tau], precision)
    }

    /// Diagonal model: residue eigenvalue `taus[j]` on the `j`-th line.
    pub fn diagonal(taus: &[Rational], precision: i64) -> Self {
        let rank = taus.len();
        let matrix = (0..rank)
            .map(|i| {
                (0..rank)
                    .map(|j| {
                        if i == j {
                            LaurentSeries::constant(taus[i].clone(), precision)
                        } else {
                            LaurentSeries::zero(precision)
                        }
                    })
                    .collect()
            })
            .collect();
        LaurentModel { rank, precision, matrix }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn precision(&self) -> i64 {
        self.precision
    }

    pub fn matrix(&self) -> &[Vec<LaurentSeries>] {
        &self.matrix
    }

    /// The residue of the connection: the constant term of `A`.
    pub fn residue_matrix(&self) -> Vec<Vec<Rational>> {
        self.matrix
            .iter()
            .map(|row| row.iter().map(|s| s.coeff(0)).collect())
            .collect()
    }

    /// Characteristic polynomial of the residue, monic, highest degree first.
    pub fn residue_char_poly(&self) -> Vec<Rational> {
        char_poly(&self.residue_matrix())
    }

    /// Whether the residue spectrum equals `expected` as a multiset; exact,
    /// via the characteristic polynomial.
    pub fn spectrum_matches(&self, expected: &[Rational]) -> bool {
        self.residue_char_poly() == monic_from_roots(expected)
    }

    /// Tensoring by the `n`-th power of the point: in the local model the
    /// basis changes by `w^-n`, which shifts the connection matrix by `-n`.
    pub fn twist(&self, n: i64) -> LaurentModel {
        let mut matrix = self.matrix.clone();
        for (i, row) in matrix.iter_mut().enumerate() {
            row[i] = row[i].add(&LaurentSeries::constant(Rational::int(-n), self.precision));
        }
        LaurentModel { rank: self.rank, precision: self.precision, matrix }
    }

    /// Pullback under the totally ramified `w -> w^delta`: the connection
    /// matrix becomes `delta * A(w^delta)`.
    pub fn pullback(&self, delta: i64) -> LaurentModel {
        assert!(delta >= 1);
        let matrix = self
            .matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| s.substitute_power(delta).scale(&Rational::int(delta)))
                    .collect()
            })
            .collect();
        LaurentModel { rank: self.rank, precision: self.precision * delta, matrix }
    }
}

/// Direct image of the local model through `t = w^b`, computed symbolically:
/// sections are rewritten in the basis `{w^c e_j}` using `w dw = (1/b) t dt`
/// and `w^(m+c) = w^((m+c) mod b) t^((m+c) div b)`.
pub fn oracle_pushforward(model: &LaurentModel, b: usize) -> Result<LaurentModel> {
    if b == 0 {
        return Err(Error::OutOfRange("ramification index must be positive".into()));
    }
    let b_i = b as i64;
    if model.precision < 2 * b_i {
        return Err(Error::PrecisionLoss(format!(
            "precision {} is below 2b = {}",
            model.precision,
            2 * b_i
        )));
    }
    let r = model.rank;
    let out_rank = r * b;
    let out_prec = model.precision / b_i;
    let idx = |level: usize, j: usize| level * r + j;
    let inv_b = Rational::one().checked_div(&Rational::int(b_i))?;

    let mut matrix = vec![vec![LaurentSeries::zero(out_prec); out_rank]; out_rank];
    for level in 0..b {
        for j in 0..r {
            let col = idx(level, j);
            // c w^c e_j from differentiating the basis monomial
            matrix[col][col].add_term(0, inv_b.scale(level as i64));
            for i in 0..r {
                for (m, a) in model.matrix[i][j].terms() {
                    let total = m + level as i64;
                    let target_level = (total % b_i) as usize;
                    let t_exp = total / b_i;
                    matrix[idx(target_level, i)][col].add_term(t_exp, a * &inv_b);
                }
            }
        }
    }
    LaurentModel::new(out_rank, out_prec, matrix)
}

/// The vanishing-order filtration of the direct-image fiber in the monomial
/// basis: `dim F_l = (b - l) * r` for `0 <= l <= b`.
pub fn vanishing_filtration_dims(rank: usize, b: usize) -> Vec<usize> {
    (0..=b).map(|l| (b - l) * rank).collect()
}

/// The graded refinement of one level of the vanishing-order filtration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelRefinement {
    pub level: usize,
    /// `(dim, weight)` pairs in flag order; dims sum to `rank`.
    pub steps: Vec<(usize, Rational)>,
}

/// Brute-force filtration of the direct-image fiber: enumerate the monomial
/// basis `{w^c e_v}`, attach each basis slot `e_v` to its flag step, and read
/// off the graded dimensions per vanishing order `c` with the weights
/// `(c + lambda) / b`.
pub fn oracle_filtration_dims(rank: usize, b: usize, flag: &WeightedFlag) -> Result<Vec<LevelRefinement>> {
    if flag.rank() != rank {
        return Err(Error::RankMismatch(format!(
            "flag rank {} does not match rank {rank}",
            flag.rank()
        )));
    }
    if b == 0 {
        return Err(Error::OutOfRange("ramification index must be positive".into()));
    }
    // slot -> flag step index
    let mut step_of_slot = Vec::with_capacity(rank);
    for (s, step) in flag.steps().iter().enumerate() {
        step_of_slot.extend(std::iter::repeat_n(s, step.dim));
    }
    let b_rat = Rational::int(b as i64);
    let mut out = Vec::with_capacity(b);
    for level in 0..b {
        let mut per_step = vec![0usize; flag.steps().len()];
        for slot in 0..rank {
            per_step[step_of_slot[slot]] += 1;
        }
        let steps = flag
            .steps()
            .iter()
            .zip(per_step)
            .map(|(step, dim)| {
                let weight = (Rational::int(level as i64) + step.weight.clone())
                    .checked_div(&b_rat)
                    .expect("b > 0");
                (dim, weight)
            })
            .collect();
        out.push(LevelRefinement { level, steps });
    }
    Ok(out)
}

/// Characteristic polynomial of a square rational matrix via the
/// Faddeev-LeVerrier recurrence; monic, highest degree first.
pub fn char_poly(matrix: &[Vec<Rational>]) -> Vec<Rational> {
    let n = matrix.len();
    assert!(matrix.iter().all(|row| row.len() == n));
    let mut coeffs = vec![Rational::one()];
    let mut m: Vec<Vec<Rational>> = vec![vec![Rational::zero(); n]; n]; // M_0 = 0
    let mut c = Rational::one(); // c_0 = 1
    for k in 1..=n {
        // M_k = A (M_{k-1} + c_{k-1} I)
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = row[i].clone() + c.clone();
        }
        let mut next = vec![vec![Rational::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = Rational::zero();
                for (l, m_row) in m.iter().enumerate() {
                    acc = acc + &matrix[i][l] * &m_row[j];
                }
                next[i][j] = acc;
            }
        }
        m = next;
        let trace: Rational = (0..n).map(|i| m[i][i].clone()).sum();
        c = -trace.checked_div(&Rational::int(k as i64)).expect("k > 0");
        coeffs.push(c.clone());
    }
    coeffs
}

/// `prod (x - root)`, monic, highest degree first.
pub fn monic_from_roots(roots: &[Rational]) -> Vec<Rational> {
    let mut poly = vec![Rational::one()];
    for root in roots {
        let mut next = vec![Rational::zero(); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] = next[i].clone() + c.clone();
            next[i + 1] = next[i + 1].clone() - c * root;
        }
        poly = next;
    }
    poly
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic::FlagStep;

    fn rat(p: i64, q: i64) -> Rational {
        Rational::of(p, q)
    }

    #[test]
    fn char_poly_of_diagonal() {
        let m = vec![
            vec![rat(1, 2), Rational::zero()],
            vec![Rational::zero(), rat(1, 3)],
        ];
        assert_eq!(char_poly(&m), monic_from_roots(&[rat(1, 2), rat(1, 3)]));
    }

    #[test]
    fn char_poly_detects_multiplicity() {
        let m = vec![
            vec![rat(1, 2), Rational::one()],
            vec![Rational::zero(), rat(1, 2)],
        ];
        assert_eq!(char_poly(&m), monic_from_roots(&[rat(1, 2), rat(1, 2)]));
        assert_ne!(char_poly(&m), monic_from_roots(&[rat(1, 2), rat(1, 3)]));
    }

    #[test]
    fn trivial_connection_through_squaring() {
        let model = LaurentModel::scalar(Rational::zero(), DEFAULT_PRECISION);
        let pushed = oracle_pushforward(&model, 2).unwrap();
        assert_eq!(pushed.rank(), 2);
        assert!(pushed.spectrum_matches(&[Rational::zero(), rat(1, 2)]));
    }

    #[test]
    fn unramified_pushforward_keeps_residue() {
        let model = LaurentModel::scalar(rat(2, 3), DEFAULT_PRECISION);
        let pushed = oracle_pushforward(&model, 1).unwrap();
        assert!(pushed.spectrum_matches(&[rat(2, 3)]));
    }

    #[test]
    fn constant_residue_through_cubing() {
        let tau = rat(1, 2);
        let model = LaurentModel::scalar(tau.clone(), DEFAULT_PRECISION);
        let pushed = oracle_pushforward(&model, 3).unwrap();
        let expected: Vec<Rational> = (0..3)
            .map(|c| (tau.clone() + Rational::int(c)).checked_div(&Rational::int(3)).unwrap())
            .collect();
        assert!(pushed.spectrum_matches(&expected));
    }

    #[test]
    fn higher_order_terms_leave_spectrum_alone() {
        // A(w) = tau + w: the w-term lands strictly below the block diagonal
        let tau = rat(1, 4);
        let mut entry = LaurentSeries::constant(tau.clone(), DEFAULT_PRECISION);
        entry.add_term(1, Rational::one());
        let model = LaurentModel::new(1, DEFAULT_PRECISION, vec![vec![entry]]).unwrap();
        let pushed = oracle_pushforward(&model, 2).unwrap();
        assert!(pushed.spectrum_matches(&[
            tau.clone().checked_div(&Rational::int(2)).unwrap(),
            (tau + Rational::one()).checked_div(&Rational::int(2)).unwrap(),
        ]));
    }

    #[test]
    fn twist_shifts_residue() {
        let tau = rat(3, 4);
        let model = LaurentModel::scalar(tau.clone(), DEFAULT_PRECISION);
        let twisted = model.twist(2);
        assert!(twisted.spectrum_matches(&[tau - Rational::int(2)]));
    }

    #[test]
    fn pullback_scales_residue() {
        let tau = rat(1, 6);
        let model = LaurentModel::scalar(tau.clone(), DEFAULT_PRECISION);
        let pulled = model.pullback(3);
        assert!(pulled.spectrum_matches(&[tau.scale(3)]));
    }

    #[test]
    fn pushforward_then_pullback_on_diagonal() {
        // push a rank-2 diagonal model through b = 2 and check the spectrum
        let model = LaurentModel::diagonal(&[Rational::zero(), rat(1, 2)], DEFAULT_PRECISION);
        let pushed = oracle_pushforward(&model, 2).unwrap();
        assert!(pushed.spectrum_matches(&[
            Rational::zero(),
            rat(1, 4),
            rat(1, 2),
            rat(3, 4),
        ]));
    }

    #[test]
    fn precision_guard() {
        let model = LaurentModel::scalar(Rational::zero(), 3);
        assert!(matches!(oracle_pushforward(&model, 2), Err(Error::PrecisionLoss(_))));
    }

    #[test]
    fn negative_valuation_rejected() {
        let entry = LaurentSeries::monomial(-1, Rational::one(), DEFAULT_PRECISION);
        assert!(LaurentModel::new(1, DEFAULT_PRECISION, vec![vec![entry]]).is_err());
    }

    #[test]
    fn filtration_dims_trivial_flag() {
        assert_eq!(vanishing_filtration_dims(1, 2), vec![2, 1, 0]);
        let flag = WeightedFlag::trivial(1);
        let levels = oracle_filtration_dims(1, 2, &flag).unwrap();
        assert_eq!(levels.len(), 2);
        assert_eq!(levels[0].steps, vec![(1, Rational::zero())]);
        assert_eq!(levels[1].steps, vec![(1, rat(1, 2))]);
    }

    #[test]
    fn filtration_dims_etale() {
        let flag = WeightedFlag::new(vec![
            FlagStep { dim: 1, weight: Rational::zero() },
            FlagStep { dim: 1, weight: rat(1, 2) },
        ])
        .unwrap();
        let levels = oracle_filtration_dims(2, 1, &flag).unwrap();
        assert_eq!(levels.len(), 1);
        assert_eq!(levels[0].steps, vec![(1, Rational::zero()), (1, rat(1, 2))]);
    }

    #[test]
    fn filtration_dims_quarter_weight() {
        let flag = WeightedFlag::new(vec![FlagStep { dim: 1, weight: rat(1, 4) }]).unwrap();
        let levels = oracle_filtration_dims(1, 3, &flag).unwrap();
        let weights: Vec<Rational> =
            levels.iter().flat_map(|l| l.steps.iter().map(|(_, w)| w.clone())).collect();
        assert_eq!(weights, vec![rat(1, 12), rat(5, 12), rat(3, 4)]);
        assert!(levels.iter().all(|l| l.steps.iter().map(|(d, _)| d).sum::<usize>() == 1));
    }

    #[test]
    fn filtration_matches_vanishing_dims() {
        let flag = WeightedFlag::new(vec![
            FlagStep { dim: 2, weight: rat(1, 3) },
            FlagStep { dim: 1, weight: rat(1, 2) },
        ])
        .unwrap();
        let levels = oracle_filtration_dims(3, 4, &flag).unwrap();
        let dims = vanishing_filtration_dims(3, 4);
        for l in 0..=4 {
            let above: usize = levels
                .iter()
                .filter(|lv| lv.level >= l)
                .map(|lv| lv.steps.iter().map(|(d, _)| d).sum::<usize>())
                .sum();
            assert_eq!(above, dims[l]);
        }
    }
}
