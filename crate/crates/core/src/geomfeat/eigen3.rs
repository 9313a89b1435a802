/// Eigenvalues of a symmetric 3x3 matrix, sorted descending.
///
/// Closed-form trigonometric solution of the characteristic cubic. Input is
/// the upper triangle `[a00, a01, a02, a11, a12, a22]`.
pub fn symmetric_eigenvalues_3x3(m: [f64; 6]) -> [f64; 3] {
    let [a00, a01, a02, a11, a12, a22] = m;
    let off = a01 * a01 + a02 * a02 + a12 * a12;
    let mut eig = if off == 0.0 {
        [a00, a11, a22]
    } else {
        let q = (a00 + a11 + a22) / 3.0;
        let (b00, b11, b22) = (a00 - q, a11 - q, a22 - q);
        let p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * off;
        let p = (p2 / 6.0).sqrt();
        if p == 0.0 {
            [q, q, q]
        } else {
            // det((A - qI) / p) / 2, clamped against round-off.
            let det = b00 * (b11 * b22 - a12 * a12) - a01 * (a01 * b22 - a12 * a02)
                + a02 * (a01 * a12 - b11 * a02);
            let r = (det / (2.0 * p * p * p)).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            let e1 = q + 2.0 * p * phi.cos();
            let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
            [e1, 3.0 * q - e1 - e3, e3]
        }
    };
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}
