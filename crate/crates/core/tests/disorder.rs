//! Displacement ensembles at small amplitude.

use spinlens::disorder::{
    linearized_broadening, plane_wave_broadening, BaseScenario, DisorderKind,
};
use spinlens::lattice::{build_couplings, build_lattice, CouplingModel};
use spinlens::lens::LensDesign;

fn base(model: CouplingModel) -> BaseScenario {
    let table = build_lattice(&[200], 1.0).unwrap();
    BaseScenario {
        table,
        model,
        design: LensDesign::thick(vec![1e-3], vec![100.0]),
        sigma0: 10.0,
        center: vec![100.0],
        focus: vec![100.0],
        t_eval: 10.0,
        tol: 1e-10,
        radius: 3.0,
    }
}

/// Ensemble-mean plane-wave broadening for each `δ`.
fn mean_broadening(b: &BaseScenario, deltas: &[f64], k: f64) -> Vec<f64> {
    let h0 = build_couplings(&b.table, &b.model, &vec![0.0; b.table.len()]).unwrap();
    let reps = 40;
    deltas
        .iter()
        .map(|&d| {
            (0..reps)
                .map(|r| {
                    let t = b
                        .disordered_table(DisorderKind::Displacement { delta: d }, 5, r)
                        .unwrap();
                    let h = build_couplings(&t, &b.model, &vec![0.0; t.len()]).unwrap();
                    plane_wave_broadening(&h, &h0, &t, &[k]).unwrap()
                })
                .sum::<f64>()
                / reps as f64
        })
        .collect()
}

#[test]
fn broadening_is_linear_in_small_displacements() {
    let deltas = [0.01, 0.02, 0.04];
    for model in [
        CouplingModel::PowerLaw {
            j0: 1.0,
            alpha: 6.0,
            cutoff: 20.0,
        },
        CouplingModel::PowerLaw {
            j0: 1.0,
            alpha: 3.0,
            cutoff: 20.0,
        },
    ] {
        let m = mean_broadening(&base(model), &deltas, 0.7);
        let slope = (m[2] - m[0]) / (deltas[2] - deltas[0]);
        let intercept = m[0] - slope * deltas[0];
        assert!(slope > 0.0);
        // Second-order bond terms bend the curve up by a few percent at 0.04a.
        assert!(
            intercept.abs() < 0.05 * m[2],
            "{model:?}: intercept {intercept} vs {}",
            m[0]
        );
        // At the smallest amplitude the exact broadening follows the first-order expansion.
        let b = base(model);
        let lin = (0..40)
            .map(|r| {
                let t = b
                    .disordered_table(DisorderKind::Displacement { delta: deltas[0] }, 5, r)
                    .unwrap();
                let d: Vec<Vec<f64>> = t
                    .positions()
                    .iter()
                    .zip(b.table.positions())
                    .map(|(p, q)| vec![p[0] - q[0]])
                    .collect();
                linearized_broadening(&b.table, &model, &d, &[0.7]).unwrap()
            })
            .sum::<f64>()
            / 40.0;
        assert!(
            (m[0] / lin - 1.0).abs() < 0.05,
            "{model:?}: exact {} vs first order {lin}",
            m[0]
        );
    }
}

#[test]
fn nearest_neighbour_model_ignores_displacements() {
    let b = base(CouplingModel::nearest_neighbor());
    assert!(mean_broadening(&b, &[0.05], 0.7)[0] == 0.0);
}
