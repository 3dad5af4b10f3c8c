//! Dominance, non-dominated filtering and exact two-objective hypervolume.
//!
//! Everything here is in the minimization sense.

use serde::{Deserialize, Serialize};

/// An objective pair `(f1, f2)`.
pub type Objectives = [f64; 2];

/// `a` Pareto-dominates `b`: no worse in both and not equal.
#[inline]
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && a != b
}

/// Indices of points not dominated by any other point, in input order.
/// Identical points do not dominate each other and are all kept.
pub fn non_dominated_filter(points: &[Objectives]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i][0]
            .total_cmp(&points[j][0])
            .then(points[i][1].total_cmp(&points[j][1]))
    });
    let mut keep = vec![false; points.len()];
    // smallest f2 among points with strictly smaller f1
    let mut best_before = f64::INFINITY;
    let mut k = 0;
    while k < order.len() {
        let f1 = points[order[k]][0];
        let mut end = k;
        while end < order.len() && points[order[end]][0] == f1 {
            end += 1;
        }
        let group_min = points[order[k]][1];
        for &i in &order[k..end] {
            let f2 = points[i][1];
            keep[i] = !(best_before <= f2 || group_min < f2);
        }
        best_before = best_before.min(group_min);
        k = end;
    }
    (0..points.len()).filter(|&i| keep[i]).collect()
}

/// Exact area dominated by `front` and bounded by `reference`.
/// Points not strictly better than the reference in both objectives add nothing.
pub fn hypervolume_2d(front: &[Objectives], reference: &Objectives) -> f64 {
    let mut pts: Vec<Objectives> = front
        .iter()
        .copied()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in pts {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

/// `HV(front ∪ {candidate}) - HV(front)`.
pub fn hypervolume_improvement(
    front: &[Objectives],
    reference: &Objectives,
    candidate: &Objectives,
) -> f64 {
    let mut with = front.to_vec();
    with.push(*candidate);
    (hypervolume_2d(&with, reference) - hypervolume_2d(front, reference)).max(0.0)
}

/// A front pre-sorted for repeated O(m) improvement queries.
#[derive(Clone, Debug, PartialEq)]
pub struct Staircase {
    // f1 ascending, f2 strictly descending, all strictly inside the reference box
    steps: Vec<Objectives>,
    reference: Objectives,
}

impl Staircase {
    pub fn new(front: &[Objectives], reference: &Objectives) -> Self {
        let mut pts: Vec<Objectives> = front
            .iter()
            .copied()
            .filter(|p| p[0] < reference[0] && p[1] < reference[1])
            .collect();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut steps: Vec<Objectives> = Vec::with_capacity(pts.len());
        for p in pts {
            if steps.last().map_or(true, |q| p[1] < q[1]) {
                steps.push(p);
            }
        }
        Staircase {
            steps,
            reference: *reference,
        }
    }

    pub fn reference(&self) -> &Objectives {
        &self.reference
    }

    pub fn steps(&self) -> &[Objectives] {
        &self.steps
    }

    pub fn hypervolume(&self) -> f64 {
        hypervolume_2d(&self.steps, &self.reference)
    }

    /// Area gained by adding `c`.
    pub fn improvement(&self, c: &Objectives) -> f64 {
        let r = &self.reference;
        if c[0] >= r[0] || c[1] >= r[1] {
            return 0.0;
        }
        let box_area = (r[0] - c[0]) * (r[1] - c[1]);
        // Area of c's box already covered: union of the front's boxes clipped to c.
        let mut covered = 0.0;
        let mut ceiling = r[1];
        for p in &self.steps {
            let q0 = p[0].max(c[0]);
            let q1 = p[1].max(c[1]);
            if q1 < ceiling {
                covered += (r[0] - q0) * (ceiling - q1);
                ceiling = q1;
            }
        }
        (box_area - covered).max(0.0)
    }

    /// Gradient of [`Self::improvement`] in `c`. The improvement is
    /// piecewise bilinear; on a kink this is the one-sided derivative from
    /// above.
    pub fn improvement_gradient(&self, c: &Objectives) -> [f64; 2] {
        let r = &self.reference;
        if c[0] >= r[0] || c[1] >= r[1] {
            return [0.0, 0.0];
        }
        // lowest f2 of the steps left of c, first f1 of the steps below c
        let ceiling = self.steps.iter().take_while(|p| p[0] <= c[0]).last().map_or(r[1], |p| p[1]);
        let wall = self.steps.iter().find(|p| p[1] <= c[1]).map_or(r[0], |p| p[0]);
        [-(ceiling - c[1]).max(0.0), -(wall - c[0]).max(0.0)]
    }
}

/// One archived feasible design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub point: Vec<f64>,
    pub objectives: Objectives,
    pub constraint: f64,
    /// Not strictly inside the reference box, so it adds no hypervolume.
    pub beyond_reference: bool,
}

/// Feasible non-dominated set with a frozen reference point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
    reference: Objectives,
}

impl ParetoArchive {
    pub fn new(reference: Objectives) -> Self {
        ParetoArchive {
            entries: Vec::new(),
            reference,
        }
    }

    pub fn reference(&self) -> &Objectives {
        &self.reference
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objectives(&self) -> Vec<Objectives> {
        self.entries.iter().map(|e| e.objectives).collect()
    }

    /// Offers a design. Infeasible (`constraint > 0`) or dominated designs are
    /// refused; accepted ones evict what they dominate. Returns whether it
    /// was accepted.
    pub fn insert(&mut self, point: &[f64], objectives: Objectives, constraint: f64) -> bool {
        if !(constraint <= 0.0) {
            return false;
        }
        if self.entries.iter().any(|e| dominates(&e.objectives, &objectives)) {
            return false;
        }
        self.entries.retain(|e| !dominates(&objectives, &e.objectives));
        self.entries.push(ArchiveEntry {
            point: point.to_vec(),
            objectives,
            constraint,
            beyond_reference: !(objectives[0] < self.reference[0]
                && objectives[1] < self.reference[1]),
        });
        true
    }

    pub fn hypervolume(&self) -> f64 {
        hypervolume_2d(&self.objectives(), &self.reference)
    }

    pub fn staircase(&self) -> Staircase {
        Staircase::new(&self.objectives(), &self.reference)
    }

    /// Entries ordered by `f1` ascending.
    pub fn sorted_entries(&self) -> Vec<&ArchiveEntry> {
        let mut v: Vec<&ArchiveEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| {
            a.objectives[0]
                .total_cmp(&b.objectives[0])
                .then(a.objectives[1].total_cmp(&b.objectives[1]))
        });
        v
    }
}

/// Reference point rule: component-wise worst of `objectives` plus
/// `margin` times each objective's observed range. A zero range falls back
/// to `margin * max(|worst|, 1)`.
pub fn reference_point(objectives: &[Objectives], margin: f64) -> Option<Objectives> {
    if objectives.is_empty() {
        return None;
    }
    let mut out = [0.0; 2];
    for k in 0..2 {
        let lo = objectives.iter().map(|o| o[k]).fold(f64::INFINITY, f64::min);
        let hi = objectives.iter().map(|o| o[k]).fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let pad = if range > 0.0 {
            margin * range
        } else {
            margin * hi.abs().max(1.0)
        };
        out[k] = hi + pad;
    }
    Some(out)
}
