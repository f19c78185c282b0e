use crate::cloud::Point3;
use crate::geometry::NeighborIndex;
use crate::{Error, Result};

/// A loss value with its gradient with respect to one of the clouds.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: Vec<Point3>,
}

/// Symmetric Chamfer distance between `p` and `q`, gradient w.r.t. `q`.
///
/// `sum_p min_q |p - q|^2 / |P| + sum_q min_p |q - p|^2 / |Q|`. Nearest
/// matches are held fixed for the gradient.
pub fn chamfer(p: &[Point3], q: &[Point3]) -> Result<LossValue> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::InvalidInput("chamfer distance of an empty cloud".into()));
    }
    let p_index = NeighborIndex::build(p)?;
    chamfer_indexed(&p_index, q)
}

/// [`chamfer`] with a prebuilt index over the fixed cloud `P`.
pub fn chamfer_indexed(p_index: &NeighborIndex, q: &[Point3]) -> Result<LossValue> {
    if q.is_empty() {
        return Err(Error::InvalidInput("chamfer distance of an empty cloud".into()));
    }
    let p = p_index.points();
    let q_index = NeighborIndex::build(q)?;
    let np = p.len() as f64;
    let nq = q.len() as f64;
    let mut grad = vec![[0.0; 3]; q.len()];

    let mut forward = 0.0;
    for pi in p {
        let nn = q_index.nearest(pi);
        forward += nn.dist2;
        let qj = &q[nn.index];
        for a in 0..3 {
            grad[nn.index][a] += 2.0 * (qj[a] - pi[a]) / np;
        }
    }
    let mut backward = 0.0;
    for (j, qj) in q.iter().enumerate() {
        let nn = p_index.nearest(qj);
        backward += nn.dist2;
        let pi = &p[nn.index];
        for a in 0..3 {
            grad[j][a] += 2.0 * (qj[a] - pi[a]) / nq;
        }
    }
    Ok(LossValue {
        value: forward / np + backward / nq,
        grad,
    })
}

/// Chamfer distance value only; the evaluation metric.
pub fn chamfer_distance(p: &[Point3], q: &[Point3]) -> Result<f64> {
    Ok(chamfer(p, q)?.value)
}

/// One-directional mean squared nearest distance from `from` into `to`.
pub fn directed_chamfer(from: &[Point3], to: &[Point3]) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::InvalidInput("chamfer distance of an empty cloud".into()));
    }
    let idx = NeighborIndex::build(to)?;
    let s: f64 = from.iter().map(|p| idx.nearest(p).dist2).sum();
    Ok(s / from.len() as f64)
}
