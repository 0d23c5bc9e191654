use sptq_core::calibration::{
    calibrate_bench, curve_fits, polarization_visibilities, PBS_TRANSMISSION_H,
};
use sptq_core::elements::coherence_length;
use sptq_core::experiments::truth_table;
use sptq_core::ImperfectionSet;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-12)
}

#[test]
fn calibrated_constants_are_rederived() {
    let cal = calibrate_bench().unwrap();
    let stored = ImperfectionSet::calibrated();
    let b = cal.bench;
    assert_eq!(b.pbs_transmission_h, stored.pbs_transmission_h);
    assert!(close(b.plate_transmission_v, stored.plate_transmission_v, 1e-12));
    assert!(close(b.routing_error_h, stored.routing_error_h, 1e-8), "{b:?}");
    assert!(close(b.routing_error_v, stored.routing_error_v, 1e-8), "{b:?}");
    assert!(close(b.bs_reflectivity, stored.bs_reflectivity, 1e-8), "{b:?}");
    assert!(close(b.mode_overlap, stored.mode_overlap, 1e-8), "{b:?}");
    assert!(close(
        b.coherence_length.unwrap(),
        coherence_length(797e-9, 1e-9).unwrap(),
        1e-15
    ));

    let errors = truth_table(&cal.truth_table).unwrap().error_sums();
    assert!(errors.iter().all(|e| (e - 0.01).abs() < 1e-9), "{errors:?}");
    assert_eq!(cal.truth_table.pbs_transmission_h, PBS_TRANSMISSION_H);
}

#[test]
fn calibrated_set_reproduces_figures() {
    let imp = ImperfectionSet::calibrated();
    let rows = truth_table(&imp).unwrap().error_sums();
    assert!(rows.iter().all(|e| (0.005..=0.02).contains(e)), "{rows:?}");

    let [v1, v2] = polarization_visibilities(&imp).unwrap();
    assert!((v1 - 0.98).abs() < 1e-7 && (v2 - 0.962).abs() < 1e-7);

    let fits = curve_fits(&imp).unwrap();
    assert!((fits.center_deg - 44.0).abs() < 1e-6, "{}", fits.center_deg);
    assert!((fits.max_visibility.value - 0.908).abs() < 1e-7);
    assert!((fits.min_visibility.value - 0.917).abs() <= 0.016);

    let balanced = ImperfectionSet {
        bs_reflectivity: 0.5,
        ..imp
    };
    let fits = curve_fits(&balanced).unwrap();
    assert!((fits.center_deg - 45.0).abs() < 1e-6, "{}", fits.center_deg);
}
