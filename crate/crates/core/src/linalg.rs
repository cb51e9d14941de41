//! Small dense linear algebra: 2x2 matrices, a 3x3 solve for the Newton
//! polish of symmetric systems, and the 2x2 matrix exponential.
//!
//! Everything here is fixed-size and allocation-free. The matrix exponential
//! uses the closed-form eigendecomposition when the eigenvalues are well
//! separated and falls back to scaling-and-squaring with a Pade(6,6)
//! approximant when they nearly coincide (defective or almost-defective
//! case).

/// Relative eigenvalue gap below which expm switches to scaling-and-squaring.
const EIG_GAP_TOL: f64 = 1e-8;

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn symmetric(a11: f64, a12: f64, a22: f64) -> Self {
        Mat2::new(a11, a12, a12, a22)
    }

    pub fn diagonal(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2 {
            x: self.a * v.x + self.b * v.y,
            y: self.c * v.x + self.d * v.y,
        }
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn max_norm(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Solve `A v = rhs`; `None` when singular.
    pub fn solve(&self, rhs: Vec2) -> Option<Vec2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Vec2 {
            x: (self.d * rhs.x - self.b * rhs.y) / det,
            y: (self.a * rhs.y - self.c * rhs.x) / det,
        })
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    /// Leading principal minors positive (positive definiteness for
    /// symmetric input).
    pub fn is_positive_definite(&self) -> bool {
        self.a > 0.0 && self.det() > 0.0
    }
}

/// `e^{M}` for a 2x2 matrix.
pub fn expm2(m: &Mat2) -> Mat2 {
    // Eigenvalues of [[a,b],[c,d]]: (tr +- sqrt(tr^2 - 4 det)) / 2.
    let tr = m.trace();
    let disc = tr * tr - 4.0 * m.det();
    let scale = m.max_norm().max(1.0);
    if disc > (EIG_GAP_TOL * scale) * (EIG_GAP_TOL * scale) {
        // Real distinct eigenvalues: e^M = e^{l1} (M - l2 I)/(l1 - l2)
        //                                + e^{l2} (M - l1 I)/(l2 - l1).
        let sq = disc.sqrt();
        let l1 = 0.5 * (tr + sq);
        let l2 = 0.5 * (tr - sq);
        let e1 = l1.exp();
        let e2 = l2.exp();
        let p1 = m.sub(&Mat2::IDENTITY.scale(l2)).scale(e1 / (l1 - l2));
        let p2 = m.sub(&Mat2::IDENTITY.scale(l1)).scale(e2 / (l2 - l1));
        p1.add(&p2)
    } else if disc < -(EIG_GAP_TOL * scale) * (EIG_GAP_TOL * scale) {
        // Complex pair l = u +- iv: e^M = e^u (cos v I + sin v (M - u I)/v).
        let u = 0.5 * tr;
        let v = 0.5 * (-disc).sqrt();
        let eu = u.exp();
        let shifted = m.sub(&Mat2::IDENTITY.scale(u)).scale(eu * v.sin() / v);
        Mat2::IDENTITY.scale(eu * v.cos()).add(&shifted)
    } else {
        expm2_pade(m)
    }
}

/// Scaling-and-squaring with a Pade(6,6) approximant.
fn expm2_pade(m: &Mat2) -> Mat2 {
    let norm = m.max_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let a = m.scale(0.5f64.powi(squarings as i32));

    // Pade(6,6): p(A)/p(-A) with p(x) = sum b_k x^k.
    const B: [f64; 7] = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let mut power = Mat2::IDENTITY;
    let mut num = Mat2::IDENTITY.scale(B[0]);
    let mut den = Mat2::IDENTITY.scale(B[0]);
    let mut sign = 1.0;
    for bk in B.iter().skip(1) {
        power = power.mul(&a);
        sign = -sign;
        num = num.add(&power.scale(*bk));
        den = den.add(&power.scale(*bk * sign));
    }
    let mut result = den.inverse().expect("Pade denominator singular").mul(&num);
    for _ in 0..squarings {
        result = result.mul(&result);
    }
    result
}

/// Solve a 3x3 system by Gaussian elimination with partial pivoting.
/// `None` when singular.
pub fn solve3(a: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut b = *rhs;
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[pivot][col] == 0.0 {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expm_series(m: &Mat2) -> Mat2 {
        // Truncated power series with scaling, the independent oracle.
        let s = 32u32;
        let a = m.scale(1.0 / s as f64);
        let mut term = Mat2::IDENTITY;
        let mut acc = Mat2::IDENTITY;
        for k in 1..60 {
            term = term.mul(&a).scale(1.0 / k as f64);
            acc = acc.add(&term);
        }
        let mut out = acc;
        let mut pow = 1;
        while pow < s {
            out = out.mul(&out);
            pow *= 2;
        }
        out
    }

    #[test]
    fn expm_identity_at_zero() {
        let z = Mat2::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(expm2(&z), Mat2::IDENTITY);
    }

    #[test]
    fn expm_diagonal() {
        let m = Mat2::diagonal(-0.3, -1.7);
        let e = expm2(&m);
        assert!((e.a - (-0.3f64).exp()).abs() < 1e-14);
        assert!((e.d - (-1.7f64).exp()).abs() < 1e-14);
        assert!(e.b.abs() < 1e-15 && e.c.abs() < 1e-15);
    }

    #[test]
    fn expm_matches_series_oracle() {
        let cases = [
            Mat2::new(-0.5, 0.2, 0.2, -1.1),
            Mat2::new(0.3, -1.0, 1.0, 0.3),
            Mat2::new(-2.0, 5.0, 0.0, -2.0 + 1e-12),
            Mat2::new(1.2, 0.7, -0.4, 0.9),
        ];
        for m in &cases {
            let e = expm2(m);
            let o = expm_series(m);
            let scale = o.max_norm().max(1.0);
            assert!(
                e.sub(&o).max_norm() < 1e-10 * scale,
                "expm mismatch for {m:?}: {e:?} vs {o:?}"
            );
        }
    }

    #[test]
    fn solve2_round_trip() {
        let m = Mat2::new(2.0, 1.0, -1.0, 3.0);
        let v = Vec2 { x: 1.0, y: -2.0 };
        let rhs = m.mul_vec(v);
        let back = m.solve(rhs).unwrap();
        assert!((back.x - v.x).abs() < 1e-14 && (back.y - v.y).abs() < 1e-14);
    }

    #[test]
    fn solve3_round_trip() {
        let a = [[4.0, 1.0, -1.0], [1.0, 3.0, 0.5], [-1.0, 0.5, 5.0]];
        let x = [1.0, -2.0, 0.5];
        let rhs = [
            a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
            a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2],
            a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2],
        ];
        let back = solve3(&a, &rhs).unwrap();
        for i in 0..3 {
            assert!((back[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_solve_is_none() {
        let m = Mat2::new(1.0, 2.0, 2.0, 4.0);
        assert!(m.solve(Vec2 { x: 1.0, y: 1.0 }).is_none());
    }
}
