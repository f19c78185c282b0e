use ndarray::Array2;

use crate::cloud::Point3;

/// Encoded length of one scalar: the raw value plus a sin/cos pair for each
/// frequency `2^0 .. 2^m`.
pub fn encoded_len_per_scalar(pe_order: usize) -> usize {
    2 * (pe_order + 1) + 1
}

/// Encoded length of an `(x, y, z, t)` coordinate.
pub fn encoded_len(pe_order: usize) -> usize {
    4 * encoded_len_per_scalar(pe_order)
}

/// `(c, sin c, cos c, sin 2c, cos 2c, ..., sin 2^m c, cos 2^m c)` per
/// component, concatenated over the components.
pub fn positional_encode(coordinate: &[f64], pe_order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(coordinate.len() * encoded_len_per_scalar(pe_order));
    encode_into(coordinate, pe_order, &mut out);
    out
}

fn encode_into(coordinate: &[f64], pe_order: usize, out: &mut Vec<f64>) {
    for &c in coordinate {
        out.push(c);
        let mut freq = 1.0;
        for _ in 0..=pe_order {
            let (s, co) = (freq * c).sin_cos();
            out.push(s);
            out.push(co);
            freq *= 2.0;
        }
    }
}

/// Network input rows for a cloud observed at `time`.
pub(crate) fn encode_batch(
    points: &[Point3],
    time: f64,
    pe_order: Option<usize>,
) -> Array2<f64> {
    let width = match pe_order {
        Some(m) => encoded_len(m),
        None => 4,
    };
    let mut data = Vec::with_capacity(points.len() * width);
    for p in points {
        let coord = [p[0], p[1], p[2], time];
        match pe_order {
            Some(m) => encode_into(&coord, m, &mut data),
            None => data.extend_from_slice(&coord),
        }
    }
    Array2::from_shape_vec((points.len(), width), data).expect("row width is fixed")
}
