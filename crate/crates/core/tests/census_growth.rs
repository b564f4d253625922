//! Growth of the distinct-value count with the number of pitchfork scales.

use qls_poisson::census::census;
use qls_poisson::field::{pitchfork3d, rasterize, InterfaceRule};
use qls_poisson::grid::GridSpec;
use qls_poisson::operator::BoundaryMode;

/// `(scales, distinct cell values, D_init)` for every admissible scale count.
fn growth(ell: u32) -> Vec<(u32, usize, usize)> {
    let grid = GridSpec::new(ell, 1.0).unwrap();
    (1..=ell)
        .map(|scales| {
            let f = rasterize(&pitchfork3d(&grid, scales, 1.0, 0.01).unwrap(), &grid).unwrap();
            let (_, c) = census(&f, InterfaceRule::Harmonic, &BoundaryMode::GhostDirichlet).unwrap();
            (scales, c.cell_values, c.d_init)
        })
        .collect()
}

#[test]
fn distinct_values_obey_f12_bound_and_grow_monotonically() {
    for ell in [4, 5] {
        let rows = growth(ell);
        for &(scales, fc, d_init) in &rows {
            assert_eq!(fc, scales as usize + 1);
            assert!((d_init as f64) <= (fc as f64).powi(12), "{d_init} > {fc}^12");
        }
        assert!(rows.windows(2).all(|w| w[1].2 > w[0].2), "ell {ell}: {rows:?}");
    }
}

#[test]
fn distinct_values_at_most_double_per_added_scale() {
    for ell in [4, 5] {
        let rows = growth(ell);
        let ratios: Vec<f64> = rows.windows(2).map(|w| w[1].2 as f64 / w[0].2 as f64).collect();
        assert!(
            ratios.iter().all(|r| *r <= 2.0),
            "ell {ell}: D_init by scale {:?}, successive ratios {ratios:.3?}",
            rows.iter().map(|r| r.2).collect::<Vec<_>>()
        );
    }
}
