//! Branched coverings of curves as monodromy data.
//!
//! A covering `Y -> X` of degree `n` is stored as a tuple of permutations of
//! the `n` sheets: one pair per handle of the base and one permutation per
//! marked point. The product relation of the punctured surface group must
//! hold for the data to describe an actual covering. `Y` is allowed to be
//! disconnected; its components are the orbits of the tuple.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// A smooth projective base curve with labelled marked points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedCurve {
    genus: usize,
    marked_points: Vec<String>,
}

impl MarkedCurve {
    /// Labels must be pairwise distinct, nonempty and free of `:` (reserved
    /// for the canonical names of points upstairs).
    pub fn new(genus: usize, marked_points: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for label in &marked_points {
            if label.is_empty() || label.contains(':') || label.contains(char::is_whitespace) {
                return Err(Error::Parse(format!("bad point label {label:?}")));
            }
            if !seen.insert(label.clone()) {
                return Err(Error::Parse(format!("duplicate point label {label:?}")));
            }
        }
        Ok(MarkedCurve { genus, marked_points })
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn marked_points(&self) -> &[String] {
        &self.marked_points
    }

    pub fn is_marked(&self, label: &str) -> bool {
        self.marked_points.iter().any(|p| p == label)
    }
}

/// A permutation of `{0, .., n-1}` in one-line notation.
///
/// File formats use 1-based entries; the in-memory form is 0-based.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { images: (0..n).collect() }
    }

    /// From 0-based images; validates bijectivity.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(Error::Parse(format!(
                    "not a permutation of 0..{n}: {images:?}"
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation { images })
    }

    /// From 1-based one-line notation, e.g. `[2, 1, 3]`.
    pub fn from_one_line(entries: &[usize]) -> Result<Self> {
        if entries.contains(&0) {
            return Err(Error::Parse("one-line entries are 1-based".into()));
        }
        Self::from_images(entries.iter().map(|&e| e - 1).collect())
    }

    /// From 1-based disjoint cycles, e.g. `[[1, 2], [3]]`; fixed points may
    /// be omitted.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut used = vec![false; n];
        for cycle in cycles {
            for (i, &e) in cycle.iter().enumerate() {
                if e == 0 || e > n {
                    return Err(Error::Parse(format!("cycle entry {e} out of 1..={n}")));
                }
                if used[e - 1] {
                    return Err(Error::Parse(format!("entry {e} repeated across cycles")));
                }
                used[e - 1] = true;
                let next = cycle[(i + 1) % cycle.len()];
                images[e - 1] = next - 1;
            }
        }
        Self::from_images(images)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    /// Function composition: `(self . other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.degree(), other.degree());
        Permutation {
            images: (0..self.degree()).map(|i| self.apply(other.apply(i))).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.degree()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        Permutation { images }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Disjoint cycles, each rotated to start at its minimum, sorted by
    /// minimum. Fixed points appear as singleton cycles.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut i = self.apply(start);
            while i != start {
                seen[i] = true;
                cycle.push(i);
                i = self.apply(i);
            }
            out.push(cycle);
        }
        out
    }

    pub fn cycle_containing(&self, i: usize) -> Vec<usize> {
        let mut cycle = vec![i];
        let mut j = self.apply(i);
        while j != i {
            cycle.push(j);
            j = self.apply(j);
        }
        let min_pos = cycle
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| v)
            .map(|(p, _)| p)
            .unwrap();
        cycle.rotate_left(min_pos);
        cycle
    }

    /// Sheet relabelling: `relabel . self . relabel^-1`.
    pub fn conjugate(&self, relabel: &Permutation) -> Permutation {
        relabel.compose(self).compose(&relabel.inverse())
    }

    /// 1-based one-line notation for serialization.
    pub fn one_line(&self) -> Vec<usize> {
        self.images.iter().map(|&i| i + 1).collect()
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Permutation {
    /// Cycle notation with 1-based entries; fixed points suppressed.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles: Vec<Vec<usize>> =
            self.cycles().into_iter().filter(|c| c.len() > 1).collect();
        if cycles.is_empty() {
            return write!(f, "id");
        }
        for cycle in cycles {
            let entries: Vec<String> = cycle.iter().map(|&i| (i + 1).to_string()).collect();
            write!(f, "({})", entries.join(" "))?;
        }
        Ok(())
    }
}

/// `[a, b] = a b a^-1 b^-1`.
pub fn commutator(a: &Permutation, b: &Permutation) -> Permutation {
    a.compose(b).compose(&a.inverse()).compose(&b.inverse())
}

/// Monodromy data of a branched covering of the base curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoveringMonodromy {
    base: MarkedCurve,
    degree: usize,
    handles: Vec<Permutation>,
    branch: BTreeMap<String, Permutation>,
}

impl CoveringMonodromy {
    /// `handles` holds `2 * genus` permutations `a1, b1, a2, b2, ...`.
    /// Marked points missing from `branch` get the identity.
    pub fn new(
        base: MarkedCurve,
        degree: usize,
        handles: Vec<Permutation>,
        branch: BTreeMap<String, Permutation>,
    ) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidCovering("degree must be positive".into()));
        }
        if handles.len() != 2 * base.genus() {
            return Err(Error::InvalidCovering(format!(
                "expected {} handle permutations, got {}",
                2 * base.genus(),
                handles.len()
            )));
        }
        for p in handles.iter().chain(branch.values()) {
            if p.degree() != degree {
                return Err(Error::InvalidCovering(format!(
                    "permutation degree {} does not match covering degree {}",
                    p.degree(),
                    degree
                )));
            }
        }
        let mut branch = branch;
        for label in base.marked_points() {
            branch.entry(label.clone()).or_insert_with(|| Permutation::identity(degree));
        }
        if let Some(label) = branch.keys().find(|l| !base.is_marked(l)) {
            return Err(Error::UnknownPoint(label.clone()));
        }
        Ok(CoveringMonodromy { base, degree, handles, branch })
    }

    pub fn identity_cover(base: MarkedCurve) -> Self {
        let handles = vec![Permutation::identity(1); 2 * base.genus()];
        Self::new(base, 1, handles, BTreeMap::new()).expect("identity cover is well-formed")
    }

    pub fn base(&self) -> &MarkedCurve {
        &self.base
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn handles(&self) -> &[Permutation] {
        &self.handles
    }

    pub fn branch_perms(&self) -> &BTreeMap<String, Permutation> {
        &self.branch
    }

    pub fn branch_perm(&self, label: &str) -> Result<&Permutation> {
        self.branch.get(label).ok_or_else(|| Error::UnknownPoint(label.to_string()))
    }

    /// The surface-group word: commutators of the handle pairs followed by
    /// the branch permutations in marked-point order. Factors act left to
    /// right (the leftmost acts first).
    pub fn relation_product(&self) -> Permutation {
        let mut word: Vec<Permutation> = Vec::new();
        for pair in self.handles.chunks(2) {
            word.push(commutator(&pair[0], &pair[1]));
        }
        for label in self.base.marked_points() {
            word.push(self.branch[label].clone());
        }
        let mut acc = Permutation::identity(self.degree);
        for w in word {
            acc = w.compose(&acc);
        }
        acc
    }

    /// Checks the surface-group relation and the genus bookkeeping of every
    /// component; all violations are collected rather than short-circuited.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if !self.relation_product().is_identity() {
            violations.push(format!(
                "surface-group relation fails: product is {}",
                self.relation_product()
            ));
        } else if let Err(e) = self.components() {
            violations.push(e.to_string());
        }
        ValidationReport { violations }
    }

    fn generators(&self) -> Vec<&Permutation> {
        self.handles.iter().chain(self.branch.values()).collect()
    }

    /// Orbits of the monodromy action, each with its genus computed from the
    /// ramification over the base. Components are ordered by least sheet.
    pub fn components(&self) -> Result<Vec<CoverComponent>> {
        let generators = self.generators();
        let mut orbit_of = vec![usize::MAX; self.degree];
        let mut orbits: Vec<Vec<usize>> = Vec::new();
        for start in 0..self.degree {
            if orbit_of[start] != usize::MAX {
                continue;
            }
            let idx = orbits.len();
            let mut stack = vec![start];
            let mut orbit = Vec::new();
            orbit_of[start] = idx;
            while let Some(s) = stack.pop() {
                orbit.push(s);
                for g in &generators {
                    for t in [g.apply(s), g.inverse().apply(s)] {
                        if orbit_of[t] == usize::MAX {
                            orbit_of[t] = idx;
                            stack.push(t);
                        }
                    }
                }
            }
            orbit.sort_unstable();
            orbits.push(orbit);
        }

        let base_chi = 2i64 - 2 * self.base.genus() as i64;
        let mut out = Vec::new();
        for sheets in orbits {
            let local_degree = sheets.len() as i64;
            let mut ramification = 0i64;
            for sigma in self.branch.values() {
                for cycle in sigma.cycles() {
                    if sheets.contains(&cycle[0]) {
                        ramification += cycle.len() as i64 - 1;
                    }
                }
            }
            // 2g - 2 = d (2g_X - 2) + sum (b - 1)
            let rhs = local_degree * (-base_chi) + ramification;
            if rhs < -2 || (rhs + 2) % 2 != 0 {
                return Err(Error::NonIntegralGenus(format!(
                    "component with sheets {:?}: 2g - 2 = {rhs}",
                    sheets.iter().map(|s| s + 1).collect::<Vec<_>>()
                )));
            }
            out.push(CoverComponent { sheets, genus: ((rhs + 2) / 2) as usize });
        }
        Ok(out)
    }

    /// Cycles of the branch permutation over `x`: one entry per point of the
    /// fiber, with the cycle length as its multiplicity. Ordered by least
    /// sheet.
    pub fn ramification_profile(&self, label: &str) -> Result<Vec<RamificationCycle>> {
        let sigma = self.branch_perm(label)?;
        Ok(sigma
            .cycles()
            .into_iter()
            .map(|sheets| RamificationCycle { multiplicity: sheets.len(), sheets })
            .collect())
    }

    /// Relabel the sheets by `relabel`.
    pub fn conjugated(&self, relabel: &Permutation) -> CoveringMonodromy {
        CoveringMonodromy {
            base: self.base.clone(),
            degree: self.degree,
            handles: self.handles.iter().map(|p| p.conjugate(relabel)).collect(),
            branch: self
                .branch
                .iter()
                .map(|(l, p)| (l.clone(), p.conjugate(relabel)))
                .collect(),
        }
    }

    /// Visits every sheet relabelling `pi` with `other = pi . self . pi^-1`
    /// such that `compatible(sheet, pi(sheet))` holds pointwise. Stops when
    /// `visit` returns true; the return value says whether any visit did.
    pub fn visit_conjugations(
        &self,
        other: &CoveringMonodromy,
        compatible: &dyn Fn(usize, usize) -> bool,
        visit: &mut dyn FnMut(&Permutation) -> bool,
    ) -> bool {
        if self.degree != other.degree
            || self.base != other.base
            || self.handles.len() != other.handles.len()
        {
            return false;
        }
        let gens_a: Vec<&Permutation> = self.generators();
        let gens_b: Vec<&Permutation> = other.generators();
        let n = self.degree;
        let mut image = vec![usize::MAX; n];
        let mut used = vec![false; n];

        fn consistent(
            image: &[usize],
            gens_a: &[&Permutation],
            gens_b: &[&Permutation],
            x: usize,
        ) -> bool {
            for (ga, gb) in gens_a.iter().zip(gens_b) {
                let y = ga.apply(x);
                if image[y] != usize::MAX && image[y] != gb.apply(image[x]) {
                    return false;
                }
                for w in 0..image.len() {
                    if image[w] != usize::MAX && ga.apply(w) == x && gb.apply(image[w]) != image[x]
                    {
                        return false;
                    }
                }
            }
            true
        }

        fn search(
            x: usize,
            n: usize,
            image: &mut Vec<usize>,
            used: &mut Vec<bool>,
            gens_a: &[&Permutation],
            gens_b: &[&Permutation],
            compatible: &dyn Fn(usize, usize) -> bool,
            visit: &mut dyn FnMut(&Permutation) -> bool,
        ) -> bool {
            if x == n {
                let pi = Permutation::from_images(image.clone()).expect("bijection by search");
                return visit(&pi);
            }
            for y in 0..n {
                if used[y] || !compatible(x, y) {
                    continue;
                }
                image[x] = y;
                used[y] = true;
                if consistent(image, gens_a, gens_b, x)
                    && search(x + 1, n, image, used, gens_a, gens_b, compatible, visit)
                {
                    return true;
                }
                image[x] = usize::MAX;
                used[y] = false;
            }
            false
        }

        search(0, n, &mut image, &mut used, &gens_a, &gens_b, compatible, visit)
    }
}

/// One point of a fiber upstairs: the cycle of sheets it glues together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RamificationCycle {
    pub sheets: Vec<usize>,
    pub multiplicity: usize,
}

/// A connected component of the covering curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverComponent {
    pub sheets: Vec<usize>,
    pub genus: usize,
}

impl CoverComponent {
    pub fn local_degree(&self) -> usize {
        self.sheets.len()
    }

    pub fn contains(&self, sheet: usize) -> bool {
        self.sheets.binary_search(&sheet).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Canonical name of a point upstairs: the component it lies on, the marked
/// base point under it, and the least sheet of its monodromy cycle.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YPoint {
    pub component: usize,
    pub base: String,
    pub sheet: usize,
}

impl YPoint {
    pub fn label(&self) -> String {
        format!("c{}:{}:s{}", self.component, self.base, self.sheet + 1)
    }

    pub fn parse(label: &str) -> Result<YPoint> {
        let parts: Vec<&str> = label.split(':').collect();
        let bad = || Error::Parse(format!("bad point name {label:?} (want cN:label:sM)"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let component =
            parts[0].strip_prefix('c').and_then(|s| s.parse::<usize>().ok()).ok_or_else(bad)?;
        let sheet =
            parts[2].strip_prefix('s').and_then(|s| s.parse::<usize>().ok()).ok_or_else(bad)?;
        if sheet == 0 {
            return Err(bad());
        }
        Ok(YPoint { component, base: parts[1].to_string(), sheet: sheet - 1 })
    }
}

impl fmt::Display for YPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}
