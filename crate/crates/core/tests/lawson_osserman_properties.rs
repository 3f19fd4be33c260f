use bernstein_lab::lawson_osserman::{
    axis_residual, hopf_map, mss_residual_at, mss_residual_fd, random_point, solve_k, LoConeMap, Quaternion, S3Point,
};
use nalgebra::{Matrix3, Matrix4};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hamilton(p: [f64; 4], q: [f64; 4]) -> [f64; 4] {
    let [a1, b1, c1, d1] = p;
    let [a2, b2, c2, d2] = q;
    [
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ]
}

fn unit(v: [f64; 4]) -> [f64; 4] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// `k (|z1|^2 - |z2|^2, 2 Re(..), 2 Im(..)) / |z|` written out in real coordinates.
fn cone_map(k: f64, x: [f64; 4]) -> [f64; 3] {
    let [a, b, c, d] = x;
    let r = (a * a + b * b + c * c + d * d).sqrt();
    [k * (a * a + b * b - c * c - d * d) / r, k * 2.0 * (a * d + b * c) / r, k * 2.0 * (b * d - a * c) / r]
}

/// `g^{ij} u_ij` with a fourth-order difference stencil, independent of the library.
fn residual_oracle(k: f64, x: [f64; 4]) -> [f64; 3] {
    let h = 1e-3;
    let at = |d: [f64; 4]| cone_map(k, [x[0] + d[0], x[1] + d[1], x[2] + d[2], x[3] + d[3]]);
    let shift = |i: usize, s: f64, j: usize, t: f64| {
        let mut d = [0.0; 4];
        d[i] += s;
        d[j] += t;
        d
    };
    let mut grad = [[0.0; 4]; 3];
    let mut hess = [Matrix4::<f64>::zeros(); 3];
    for i in 0..4 {
        let f = |s: f64| at(shift(i, s, i, 0.0));
        let (p1, m1, p2, m2, c0) = (f(h), f(-h), f(2.0 * h), f(-2.0 * h), f(0.0));
        for a in 0..3 {
            grad[a][i] = (8.0 * (p1[a] - m1[a]) - (p2[a] - m2[a])) / (12.0 * h);
            hess[a][(i, i)] = (16.0 * (p1[a] + m1[a]) - (p2[a] + m2[a]) - 30.0 * c0[a]) / (12.0 * h * h);
        }
        for j in 0..i {
            let g = |s: f64, t: f64| at(shift(i, s, j, t));
            for a in 0..3 {
                let mixed = |e: f64| (g(e, e)[a] - g(e, -e)[a] - g(-e, e)[a] + g(-e, -e)[a]) / (4.0 * e * e);
                let v = (4.0 * mixed(h) - mixed(2.0 * h)) / 3.0;
                hess[a][(i, j)] = v;
                hess[a][(j, i)] = v;
            }
        }
    }
    let mut g = Matrix4::<f64>::identity();
    for row in &grad {
        let v = nalgebra::Vector4::from(*row);
        g += v * v.transpose();
    }
    let gi = g.try_inverse().unwrap();
    [0, 1, 2].map(|a| gi.component_mul(&hess[a]).sum())
}

#[test]
fn slope_solves_axis_equation() {
    let k = solve_k();
    assert!((k - 5.0_f64.sqrt() / 2.0).abs() <= 1e-10);
    // 1 + 4k^2 = 6 exactly at the root.
    assert!((1.0 + 4.0 * k * k - 6.0).abs() < 1e-14);
    assert!(axis_residual(1.0) < 0.0 && axis_residual(2.0) > 0.0);
}

#[test]
fn residual_agrees_with_independent_stencil() {
    let k = solve_k();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let x = random_point(&mut rng, 0.5, 2.0);
        let lib = mss_residual_fd(x, k).unwrap();
        let exact = mss_residual_at(x, k).unwrap();
        let oracle = residual_oracle(k, x);
        for a in 0..3 {
            assert!(oracle[a].abs() < 1e-6, "oracle residual {oracle:?} at {x:?}");
            assert!(lib[a].abs() < 1e-6 && exact[a].abs() < 1e-10, "{lib:?} {exact:?}");
        }
    }
}

#[test]
fn other_slopes_are_not_minimal() {
    for k in [0.8, 1.0, 1.5] {
        let r = mss_residual_at([1.0, 0.0, 0.0, 0.0], k).unwrap();
        assert!(r[0].abs() > 1e-3, "k = {k}: {r:?}");
    }
}

#[test]
fn axis_metric_is_diagonal() {
    let k = solve_k();
    let g = LoConeMap::new(k).unwrap().metric([1.0, 0.0, 0.0, 0.0]).unwrap();
    let want = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0 + k * k, 1.0, 1.0 + 4.0 * k * k, 1.0 + 4.0 * k * k));
    assert!((g - want).amax() <= 4.0 * f64::EPSILON * want.amax());
}

proptest! {
    #[test]
    fn quaternion_product_matches_group_law(p in prop::array::uniform4(-1.0_f64..1.0), q in prop::array::uniform4(-1.0_f64..1.0)) {
        prop_assume!(p.iter().map(|x| x * x).sum::<f64>() > 1e-2 && q.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        let (p, q) = (unit(p), unit(q));
        let (w, z) = (S3Point::from_real(p).unwrap(), S3Point::from_real(q).unwrap());
        let prod = w.mul(z).quaternion().0;
        let lib = w.quaternion().mul(z.quaternion()).0;
        let oracle = hamilton(w.quaternion().0, z.quaternion().0);
        for i in 0..4 {
            prop_assert!((prod[i] - lib[i]).abs() <= 1e-12);
            prop_assert!((lib[i] - oracle[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn rotation_of_unit_quaternion_is_special_orthogonal(q in prop::array::uniform4(-1.0_f64..1.0)) {
        prop_assume!(q.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        let r = Quaternion(unit(q)).rotation();
        let m = Matrix3::from_fn(|i, j| r[i][j]);
        prop_assert!((m.transpose() * m - Matrix3::identity()).amax() <= 1e-12);
        prop_assert!((m.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn hopf_image_is_on_the_sphere(x in prop::array::uniform4(-1.0_f64..1.0)) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-2);
        let u = unit(x);
        let p = S3Point::new(Complex64::new(u[0], u[1]), Complex64::new(u[2], u[3])).unwrap();
        let h = hopf_map(&p);
        prop_assert!((h.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cone_map_is_one_homogeneous(x in prop::array::uniform4(-2.0_f64..2.0), lambda in 0.1_f64..10.0, e in -4_i32..4) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-2);
        let map = LoConeMap::new(solve_k()).unwrap();
        let u = map.eval(x).unwrap();
        let two = 2.0_f64.powi(e);
        prop_assert_eq!(map.eval(x.map(|v| v * two)).unwrap(), u.map(|v| v * two));
        let w = map.eval(x.map(|v| v * lambda)).unwrap();
        for a in 0..3 {
            prop_assert!((w[a] - lambda * u[a]).abs() <= 1e-14 * lambda * (1.0 + u[a].abs()) * 4.0);
        }
    }
}
