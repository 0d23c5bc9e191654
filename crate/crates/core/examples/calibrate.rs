//! Prints the calibrated imperfection set and the figures it reproduces.

use sptq_core::calibration::{calibrate_bench, curve_fits, polarization_visibilities};
use sptq_core::experiments::truth_table;

fn main() -> Result<(), sptq_core::Error> {
    let cal = calibrate_bench()?;
    println!("truth-table set: {:#?}", cal.truth_table);
    println!("row errors: {:?}", truth_table(&cal.truth_table)?.error_sums());
    println!("bench set: {:#?}", cal.bench);
    println!("row errors: {:?}", truth_table(&cal.bench)?.error_sums());
    println!("analyzer-I visibilities: {:?}", polarization_visibilities(&cal.bench)?);
    let fits = curve_fits(&cal.bench)?;
    println!(
        "maxima peak {:.4} deg, minima trough {:.4} deg, visibilities {:.5} / {:.5}",
        fits.center_deg, fits.trough_deg, fits.max_visibility.value, fits.min_visibility.value
    );
    Ok(())
}
