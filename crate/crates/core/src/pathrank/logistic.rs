//! Regularized logistic regression trained by full-batch gradient descent.
//! Deterministic: zero init, fixed iteration count, step size scaled by a
//! bound on the loss curvature so count-valued features cannot diverge.

pub(crate) struct Logistic {
    pub weights: Vec<f64>,
    pub bias: f64,
}

const ITERATIONS: usize = 800;
const BASE_RATE: f64 = 0.9;
const L2: f64 = 1e-4;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn train_logistic(samples: &[Vec<f64>], labels: &[bool]) -> Logistic {
    assert_eq!(samples.len(), labels.len());
    let n_features = samples.first().map(Vec::len).unwrap_or(0);
    let mut weights = vec![0.0; n_features];
    let mut bias = 0.0;
    if samples.is_empty() {
        return Logistic { weights, bias };
    }

    // Curvature of the mean logistic loss is bounded by max ||x||^2 / 4.
    let max_sq_norm = samples
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .fold(1.0, f64::max);
    let rate = BASE_RATE / (0.25 * max_sq_norm + L2);

    let n = samples.len() as f64;
    let mut grad = vec![0.0; n_features];
    for _ in 0..ITERATIONS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_bias = 0.0;
        for (x, &y) in samples.iter().zip(labels) {
            let z = bias + x.iter().zip(&weights).map(|(xi, wi)| xi * wi).sum::<f64>();
            let err = sigmoid(z) - if y { 1.0 } else { 0.0 };
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += err * xi;
            }
            grad_bias += err;
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= rate * (g / n + L2 * *w);
        }
        bias -= rate * grad_bias / n;
    }
    Logistic { weights, bias }
}
