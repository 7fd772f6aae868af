use rayon::prelude::*;

use crate::count::CountVector;
use crate::error::{Error, Result};

/// Composite centroid rule over the unit simplex `{z ≥ 0, Σz = 1}` in
/// `w ∈ {2, 3}` coordinates, integrating against `dz_1 … dz_{w−1}`.
///
/// `resolution` is the number of cells per simplex edge. For `w = 3` the
/// triangle is cut into `resolution²` congruent sub-triangles.
pub fn simplex_midpoint_rule<F>(w: usize, resolution: usize, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if resolution == 0 {
        return Err(Error::usage("quadrature resolution must be positive"));
    }
    let r = resolution as f64;
    match w {
        2 => {
            let rows: Vec<f64> = (0..resolution)
                .into_par_iter()
                .map(|i| {
                    let z = (i as f64 + 0.5) / r;
                    f(&[z, 1.0 - z])
                })
                .collect();
            Ok(rows.iter().sum::<f64>() / r)
        }
        3 => {
            // upward cells: ((i, j, k) + 1/3) / r with i + j + k = r − 1,
            // downward cells: ((i, j, k) + 2/3) / r with i + j + k = r − 2
            let rows: Vec<f64> = (0..resolution)
                .into_par_iter()
                .map(|i| {
                    let mut s = 0.0;
                    for j in 0..resolution - i {
                        let k = resolution - 1 - i - j;
                        s += f(&[
                            (i as f64 + 1.0 / 3.0) / r,
                            (j as f64 + 1.0 / 3.0) / r,
                            (k as f64 + 1.0 / 3.0) / r,
                        ]);
                        if k >= 1 {
                            s += f(&[
                                (i as f64 + 2.0 / 3.0) / r,
                                (j as f64 + 2.0 / 3.0) / r,
                                ((k - 1) as f64 + 2.0 / 3.0) / r,
                            ]);
                        }
                    }
                    s
                })
                .collect();
            Ok(rows.iter().sum::<f64>() / (2.0 * r * r))
        }
        _ => Err(Error::usage(format!(
            "simplex quadrature supports W in {{2, 3}}, got {w}"
        ))),
    }
}

/// Romberg extrapolation of the midpoint rule over `resolution`,
/// `resolution / 2` and `resolution / 4` cells per edge. The rule's error
/// expands in even powers of the cell size for integrands smooth on the
/// closed simplex, so this removes the `h²` and `h⁴` terms.
pub fn simplex_quadrature<F>(w: usize, resolution: usize, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let fine = resolution - resolution % 4;
    if fine < 4 {
        return Err(Error::usage("quadrature resolution must be at least 4"));
    }
    let m1 = simplex_midpoint_rule(w, fine, &f)?;
    let m2 = simplex_midpoint_rule(w, fine / 2, &f)?;
    let m4 = simplex_midpoint_rule(w, fine / 4, &f)?;
    let a1 = (4.0 * m1 - m2) / 3.0;
    let a2 = (4.0 * m2 - m4) / 3.0;
    Ok((16.0 * a1 - a2) / 15.0)
}

/// `N! / Π x_w!` from plain floating-point products.
pub fn multinomial_coefficient(x: &[u32]) -> f64 {
    let mut coef = 1.0;
    let mut n = 0u64;
    for &c in x {
        for k in 1..=c as u64 {
            n += 1;
            coef *= n as f64 / k as f64;
        }
    }
    coef
}

/// Multinomial likelihood `p(x | z)`.
pub fn multinomial_pmf(x: &[u32], z: &[f64]) -> f64 {
    multinomial_coefficient(x)
        * x.iter()
            .zip(z)
            .map(|(&c, &p)| p.powi(c as i32))
            .product::<f64>()
}

/// Numeric `∫ p(a | z) p(b | z) dz` over the simplex for `W ≤ 3`.
pub fn simplex_integral_oracle(a: &CountVector, b: &CountVector, resolution: usize) -> Result<f64> {
    let w = a.vocab_size();
    if b.vocab_size() != w {
        return Err(Error::usage(format!(
            "vocabulary sizes differ: {w} vs {}",
            b.vocab_size()
        )));
    }
    if !(2..=3).contains(&w) {
        return Err(Error::usage(format!(
            "the simplex oracle supports W in {{2, 3}}, got {w}"
        )));
    }
    if resolution < 100 {
        return Err(Error::usage("the simplex oracle needs resolution >= 100"));
    }
    let (da, db) = (a.to_dense(), b.to_dense());
    let coef = multinomial_coefficient(&da) * multinomial_coefficient(&db);
    let expo: Vec<i32> = da.iter().zip(&db).map(|(x, y)| (x + y) as i32).collect();
    let integral = simplex_quadrature(w, resolution, |z| {
        z.iter().zip(&expo).map(|(p, &e)| p.powi(e)).product()
    })?;
    Ok(coef * integral)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(d: &[u32]) -> CountVector {
        CountVector::from_dense(d).unwrap()
    }

    #[test]
    fn hand_values() {
        let k = simplex_integral_oracle(&cv(&[1, 0]), &cv(&[0, 1]), 10_000).unwrap();
        assert!((k - 1.0 / 6.0).abs() < 1e-6);
        let k = simplex_integral_oracle(&cv(&[0, 0]), &cv(&[0, 0]), 100).unwrap();
        assert!((k - 1.0).abs() < 1e-15);
        let k = simplex_integral_oracle(&cv(&[0, 0, 0]), &cv(&[0, 0, 0]), 100).unwrap();
        assert!((k - 0.5).abs() < 1e-14);
        // ∫ z₁² over the triangle = 2!/4! = 1/12
        let k = simplex_integral_oracle(&cv(&[1, 0, 0]), &cv(&[1, 0, 0]), 200).unwrap();
        assert!((k - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_arguments() {
        let (a, b) = (cv(&[2, 1, 0]), cv(&[0, 3, 1]));
        assert_eq!(
            simplex_integral_oracle(&a, &b, 300).unwrap(),
            simplex_integral_oracle(&b, &a, 300).unwrap()
        );
    }

    #[test]
    fn rejects_large_vocabulary() {
        assert!(matches!(
            simplex_integral_oracle(&cv(&[1, 0, 0, 0]), &cv(&[1, 0, 0, 0]), 100),
            Err(Error::Usage(_))
        ));
        assert!(simplex_integral_oracle(&cv(&[1, 0]), &cv(&[1, 0]), 99).is_err());
    }

    #[test]
    fn multinomial_coefficients() {
        assert_eq!(multinomial_coefficient(&[2, 1]), 3.0);
        assert_eq!(multinomial_coefficient(&[1, 1, 1]), 6.0);
        assert_eq!(multinomial_coefficient(&[0, 0]), 1.0);
    }
}
