use super::ScalarField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub linf: f64,
    /// Anisotropic total variation of the zero extension of the field.
    pub bv: f64,
}

/// `l1`, `linf` and anisotropic total variation.
///
/// The total variation sums `|jump| * face_area` over every cell face,
/// including the box faces (the field is extended by zero).
pub fn norms(f: &ScalarField) -> Norms {
    let g = f.grid();
    let v = f.values();
    let l1 = g.cell_volume() * v.iter().map(|x| x.abs()).sum::<f64>();
    let linf = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let (nx, ny) = (g.nx(), g.ny());
    // face area normal to axis a is h^d / h_a
    let area = [g.cell_volume() / g.h(0), g.cell_volume() / g.h(1)];
    let mut bv = 0.0;
    for j in 0..ny {
        let row = &v[j * nx..(j + 1) * nx];
        bv += area[0] * (row[0].abs() + row[nx - 1].abs());
        bv += area[0] * row.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    }
    if g.dim() == 2 {
        for i in 0..nx {
            bv += area[1] * (v[i].abs() + v[(ny - 1) * nx + i].abs());
            for j in 0..ny - 1 {
                bv += area[1] * (v[(j + 1) * nx + i] - v[j * nx + i]).abs();
            }
        }
    }
    Norms { l1, linf, bv }
}

/// Total variation over interior faces only: the seminorm of the field on the
/// box, blind to its values at the box faces. Constants have zero variation.
pub fn tv_interior(f: &ScalarField) -> f64 {
    let g = f.grid();
    let v = f.values();
    let (nx, ny) = (g.nx(), g.ny());
    let area = [g.cell_volume() / g.h(0), g.cell_volume() / g.h(1)];
    let mut tv = 0.0;
    for j in 0..ny {
        tv += area[0] * v[j * nx..(j + 1) * nx].windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    }
    if g.dim() == 2 {
        for j in 0..ny - 1 {
            for i in 0..nx {
                tv += area[1] * (v[(j + 1) * nx + i] - v[j * nx + i]).abs();
            }
        }
    }
    tv
}

/// The rotation generator `[[0, -1], [1, 0]]`.
pub fn rotation_generator() -> [[f64; 2]; 2] {
    [[0.0, -1.0], [1.0, 0.0]]
}

/// Discrete `|| grad f . A x ||_{L1}` for an antisymmetric `A`.
///
/// The directional derivative along the rotation field `A x` is formed at
/// cell centers from central differences before taking absolute values, so
/// a radially symmetric field has a small norm for every `A`.
pub fn bv_a(f: &ScalarField, a: [[f64; 2]; 2]) -> Result<f64> {
    let asym = (a[0][0].abs())
        .max(a[1][1].abs())
        .max((a[0][1] + a[1][0]).abs());
    if asym > 1e-12 {
        return Err(Error::NotAntisymmetric(asym));
    }
    let g = f.grid();
    if g.dim() == 1 {
        return Ok(0.0);
    }
    let v = f.values();
    let (nx, ny) = (g.nx(), g.ny());
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
            0.0
        } else {
            v[j as usize * nx + i as usize]
        }
    };
    let mut total = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let (ii, jj) = (i as isize, j as isize);
            let dx = (at(ii + 1, jj) - at(ii - 1, jj)) / (2.0 * g.h(0));
            let dy = (at(ii, jj + 1) - at(ii, jj - 1)) / (2.0 * g.h(1));
            let x = [g.coord(0, i), g.coord(1, j)];
            let ax = [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]];
            total += (ax[0] * dx + ax[1] * dy).abs();
        }
    }
    Ok(total * g.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    #[test]
    fn zero_field_has_zero_norms() {
        let g = GridSpec::square(16, 1.0).unwrap();
        let z = ScalarField::zeros(g);
        assert_eq!(norms(&z), Norms { l1: 0.0, linf: 0.0, bv: 0.0 });
        assert_eq!(bv_a(&z, rotation_generator()).unwrap(), 0.0);
    }

    #[test]
    fn square_indicator_perimeter() {
        // side a = 1 on a grid with h = 1/16: cell-aligned, perimeter exactly 4a
        let g = GridSpec::square(64, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |x| if x[0].abs() < 0.5 && x[1].abs() < 0.5 { 1.0 } else { 0.0 });
        let n = norms(&f);
        assert!((n.bv - 4.0).abs() < 4.0 * g.h(0), "bv = {}", n.bv);
        assert!((n.l1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_norm_vanishes_for_radial_fields() {
        let g = GridSpec::square(64, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1]) * 4.0).exp());
        let tv = norms(&f).bv;
        let ba = bv_a(&f, rotation_generator()).unwrap();
        assert!(ba < 1e-2 * tv, "bv_a = {ba}, bv = {tv}");
        // a non-radial field is not small
        let e = ScalarField::from_fn(g, |x| (-(x[0] * x[0] + 4.0 * x[1] * x[1]) * 4.0).exp());
        assert!(bv_a(&e, rotation_generator()).unwrap() > 0.1 * norms(&e).bv);
    }

    #[test]
    fn interior_variation_ignores_the_box() {
        let g = GridSpec::square(32, 1.0).unwrap();
        assert_eq!(tv_interior(&ScalarField::constant(g, 2.0)), 0.0);
        // compact support: both notions agree
        let f = ScalarField::from_fn(g, |x| if x[0].abs() < 0.5 && x[1].abs() < 0.5 { 1.0 } else { 0.0 });
        assert!((tv_interior(&f) - norms(&f).bv).abs() < 1e-12);
        let ramp = ScalarField::from_fn(g, |x| x[0]);
        // int |d/dx| over the box: (max - min) * side
        let expect = (g.coord(0, 31) - g.coord(0, 0)) * 2.0;
        assert!((tv_interior(&ramp) - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_symmetric_matrix() {
        let g = GridSpec::square(16, 1.0).unwrap();
        let f = ScalarField::zeros(g);
        assert!(matches!(bv_a(&f, [[0.0, 1.0], [1.0, 0.0]]), Err(Error::NotAntisymmetric(_))));
    }

    fn field(vals: Vec<f64>) -> ScalarField {
        ScalarField::from_vec(GridSpec::square(8, 1.0).unwrap(), vals).unwrap()
    }

    proptest! {
        #[test]
        fn norms_are_seminorms(
            a in prop::collection::vec(-5.0f64..5.0, 64),
            b in prop::collection::vec(-5.0f64..5.0, 64),
            s in -3.0f64..3.0,
        ) {
            let (fa, fb) = (field(a), field(b));
            let sum = &fa + &fb;
            let (na, nb, ns) = (norms(&fa), norms(&fb), norms(&sum));
            prop_assert!(ns.l1 <= na.l1 + nb.l1 + 1e-12);
            prop_assert!(ns.linf <= na.linf + nb.linf + 1e-12);
            prop_assert!(ns.bv <= na.bv + nb.bv + 1e-12);
            let scaled = norms(&fa.map(|x| s * x));
            prop_assert!((scaled.bv - s.abs() * na.bv).abs() <= 1e-10 * (1.0 + na.bv));
            prop_assert!((scaled.l1 - s.abs() * na.l1).abs() <= 1e-10 * (1.0 + na.l1));
            let r = rotation_generator();
            let (ba, bb, bs) = (bv_a(&fa, r).unwrap(), bv_a(&fb, r).unwrap(), bv_a(&sum, r).unwrap());
            prop_assert!(bs <= ba + bb + 1e-12);
        }
    }
}
