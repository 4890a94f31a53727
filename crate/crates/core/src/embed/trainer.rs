//! Shared gradient core for margin-loss training.
//!
//! The same pair-loss and pair-gradient code is instantiated at f32 for
//! training and at f64 for finite-difference verification, so the verified
//! math is the trained math.

use std::collections::HashMap;

use crate::graph::Triple;

/// Norms below this contribute no gradient (the L2 norm is not
/// differentiable at zero).
const NORM_EPS: f64 = 1e-12;

pub(crate) trait Real:
    Copy
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
{
    fn zero() -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
}

impl Real for f32 {
    fn zero() -> Self {
        0.0
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn sqrt(self) -> Self {
        self.sqrt()
    }
}

impl Real for f64 {
    fn zero() -> Self {
        0.0
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        self.sqrt()
    }
}

/// Entity and relation matrices, row-major.
#[derive(Debug, Clone)]
pub(crate) struct Params<F> {
    pub dim: usize,
    pub entities: Vec<F>,
    pub relations: Vec<F>,
}

impl<F: Real> Params<F> {
    pub fn entity(&self, id: u32) -> &[F] {
        let d = self.dim;
        &self.entities[id as usize * d..(id as usize + 1) * d]
    }

    pub fn relation(&self, id: u32) -> &[F] {
        let d = self.dim;
        &self.relations[id as usize * d..(id as usize + 1) * d]
    }
}

pub(crate) fn energy_of<F: Real>(s: &[F], r: &[F], o: &[F]) -> F {
    let mut sum = F::zero();
    for k in 0..s.len() {
        let d = s[k] + r[k] - o[k];
        sum += d * d;
    }
    sum.sqrt()
}

/// Sparse per-batch gradient buffer. Each row accumulates in pair order, so
/// results are independent of map layout.
#[derive(Debug)]
pub(crate) struct GradBuffer<F> {
    pub entities: HashMap<u32, Vec<F>>,
    pub relations: HashMap<u32, Vec<F>>,
    dim: usize,
}

impl<F: Real> GradBuffer<F> {
    pub fn new(dim: usize) -> Self {
        Self {
            entities: HashMap::new(),
            relations: HashMap::new(),
            dim,
        }
    }

    fn entity_row(&mut self, id: u32) -> &mut [F] {
        let dim = self.dim;
        self.entities
            .entry(id)
            .or_insert_with(|| vec![F::zero(); dim])
    }

    fn relation_row(&mut self, id: u32) -> &mut [F] {
        let dim = self.dim;
        self.relations
            .entry(id)
            .or_insert_with(|| vec![F::zero(); dim])
    }

    pub fn clear(&mut self) {
        self.entities.clear();
        self.relations.clear();
    }
}

/// Adds the gradient of `weight * [gamma + E(pos) - E(neg)]_+` to the buffer
/// and returns that weighted hinge term.
///
/// Positive and negative share the relation; the negative differs from the
/// positive in subject or object only.
pub(crate) fn accumulate_pair<F: Real>(
    params: &Params<F>,
    gamma: F,
    positive: &Triple,
    negative: &Triple,
    weight: F,
    grads: &mut GradBuffer<F>,
) -> F {
    let s = params.entity(positive.subject);
    let r = params.relation(positive.relation);
    let o = params.entity(positive.object);
    let sn = params.entity(negative.subject);
    let on = params.entity(negative.object);

    let e_pos = energy_of(s, r, o);
    let e_neg = energy_of(sn, r, on);
    let margin = gamma + e_pos - e_neg;
    if margin <= F::zero() {
        return F::zero();
    }

    let dim = params.dim;
    if e_pos.to_f64() > NORM_EPS {
        let scale = weight / e_pos;
        let mut unit = vec![F::zero(); dim];
        for k in 0..dim {
            unit[k] = (s[k] + r[k] - o[k]) * scale;
        }
        let row = grads.entity_row(positive.subject);
        for k in 0..dim {
            row[k] += unit[k];
        }
        let row = grads.relation_row(positive.relation);
        for k in 0..dim {
            row[k] += unit[k];
        }
        let row = grads.entity_row(positive.object);
        for k in 0..dim {
            row[k] -= unit[k];
        }
    }
    if e_neg.to_f64() > NORM_EPS {
        let scale = weight / e_neg;
        let mut unit = vec![F::zero(); dim];
        for k in 0..dim {
            unit[k] = (sn[k] + r[k] - on[k]) * scale;
        }
        let row = grads.entity_row(negative.subject);
        for k in 0..dim {
            row[k] -= unit[k];
        }
        let row = grads.relation_row(positive.relation);
        for k in 0..dim {
            row[k] -= unit[k];
        }
        let row = grads.entity_row(negative.object);
        for k in 0..dim {
            row[k] += unit[k];
        }
    }
    weight * margin
}

/// SGD step: `param -= lr * grad` for every touched row.
pub(crate) fn apply_gradients<F: Real>(params: &mut Params<F>, grads: &GradBuffer<F>, lr: F) {
    let dim = params.dim;
    for (&id, grad) in &grads.entities {
        let row = &mut params.entities[id as usize * dim..(id as usize + 1) * dim];
        for k in 0..dim {
            row[k] -= lr * grad[k];
        }
    }
    for (&id, grad) in &grads.relations {
        let row = &mut params.relations[id as usize * dim..(id as usize + 1) * dim];
        for k in 0..dim {
            row[k] -= lr * grad[k];
        }
    }
}

/// Rescales every entity row to unit L2 norm.
pub(crate) fn normalize_entities<F: Real>(params: &mut Params<F>) {
    let dim = params.dim;
    for row in params.entities.chunks_mut(dim) {
        let mut sq = F::zero();
        for v in row.iter() {
            sq += *v * *v;
        }
        let norm = sq.sqrt();
        if norm.to_f64() > NORM_EPS {
            for v in row.iter_mut() {
                *v = *v / norm;
            }
        }
    }
}
