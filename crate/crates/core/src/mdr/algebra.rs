//! Real normed division algebras of dimension 1, 2, 4 and 8 built by
//! Cayley–Dickson doubling: `(a, b)(c, d) = (ac − d̄b, da + bc̄)`.

/// Conjugate: negates every component but the real one.
pub fn conj(x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().map(|v| -v).collect();
    if let Some(first) = out.first_mut() {
        *first = -*first;
    }
    out
}

/// Product `x ⋆ y` for `x.len() == y.len()` a power of two.
pub fn mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n.is_power_of_two());
    if n == 1 {
        return vec![x[0] * y[0]];
    }
    let h = n / 2;
    let (a, b) = x.split_at(h);
    let (c, d) = y.split_at(h);
    let ac = mul(a, c);
    let db = mul(&conj(d), b);
    let da = mul(d, a);
    let bc = mul(b, &conj(c));
    let mut out = Vec::with_capacity(n);
    out.extend(ac.iter().zip(&db).map(|(p, q)| p - q));
    out.extend(da.iter().zip(&bc).map(|(p, q)| p + q));
    out
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_and_quaternion_units() {
        // i·i = −1
        assert_eq!(mul(&[0.0, 1.0], &[0.0, 1.0]), vec![-1.0, 0.0]);
        // quaternions: i·j = ±k and j·i = −(i·j)
        let i = [0.0, 1.0, 0.0, 0.0];
        let j = [0.0, 0.0, 1.0, 0.0];
        let ij = mul(&i, &j);
        let ji = mul(&j, &i);
        assert_eq!(ij[3].abs(), 1.0);
        assert_eq!(ij, ji.iter().map(|v| -v).collect::<Vec<_>>());
    }

    #[test]
    fn conjugate_gives_squared_norm() {
        let x = [0.3, -1.2, 0.5, 2.0, -0.7, 0.1, 0.9, -0.4];
        let p = mul(&x, &conj(&x));
        let n2: f64 = x.iter().map(|v| v * v).sum();
        assert!((p[0] - n2).abs() < 1e-12);
        assert!(p[1..].iter().all(|v| v.abs() < 1e-12));
    }
}
