//! Model-level checks against the synthetic generator, whose coefficients
//! are known.

use hydrotwin::additive::{years_of, AdditiveFit, AdditiveSpec};
use hydrotwin::data::correlation_matrix;
use hydrotwin::synth::SyntheticSpec;

fn low_noise(beta: f64) -> SyntheticSpec {
    SyntheticSpec { temperature_coupling: beta, noise_sigma: 0.5, n_days: 1095, ..SyntheticSpec::default() }
}

#[test]
fn additive_fit_recovers_temperature_coupling() {
    for seed in [1, 2, 3] {
        let data = SyntheticSpec { seed, ..low_noise(0.5) }.generate().unwrap();
        let y: Vec<Option<f64>> = data.consumption.iter().map(|v| Some(*v)).collect();
        let tmax: Vec<Option<f64>> = data.tmax.iter().map(|v| Some(*v)).collect();
        let spec = AdditiveSpec::advanced(years_of(&data.dates));
        let fit = AdditiveFit::fit(&data.dates, &y, &[&tmax], &spec).unwrap();
        let beta = fit.coefficient("tmax").unwrap();
        assert!((beta - 0.5).abs() <= 0.05, "seed {seed}: {beta}");
    }
}

#[test]
fn holiday_uplift_is_recovered() {
    let data = low_noise(1.0).generate().unwrap();
    let y: Vec<Option<f64>> = data.consumption.iter().map(|v| Some(*v)).collect();
    let tmax: Vec<Option<f64>> = data.tmax.iter().map(|v| Some(*v)).collect();
    let fit = AdditiveFit::fit(&data.dates, &y, &[&tmax], &AdditiveSpec::advanced(years_of(&data.dates))).unwrap();
    let uplifts: Vec<f64> =
        fit.columns.iter().zip(&fit.coefficients).filter(|(c, _)| c.starts_with("holiday_")).map(|(_, v)| *v).collect();
    assert!(!uplifts.is_empty());
    let mean = uplifts.iter().sum::<f64>() / uplifts.len() as f64;
    assert!((mean - 10.0).abs() < 1.5, "{uplifts:?}");
}

#[test]
fn strong_coupling_is_flagged_and_absent_coupling_is_not() {
    let strong = SyntheticSpec { temperature_coupling: 3.0, n_days: 1000, ..SyntheticSpec::default() }.generate().unwrap();
    let m = correlation_matrix(&strong.frame().unwrap(), &["consumption_m3", "tmax", "prec"]).unwrap();
    assert!(m.flagged_against("consumption_m3", 0.4).iter().any(|(c, _)| c == "tmax"));
    assert_eq!(m.get("tmax", "tmax"), Some(1.0));

    // Without coupling and without a yearly cycle of its own, consumption
    // shares nothing with temperature.
    let mut flagged = 0;
    for seed in 0..20 {
        let none = SyntheticSpec { seed, temperature_coupling: 0.0, yearly_amplitude: 0.0, n_days: 1000, ..SyntheticSpec::default() };
        let m = correlation_matrix(&none.generate().unwrap().frame().unwrap(), &["consumption_m3", "tmax"]).unwrap();
        flagged += m.flagged_against("consumption_m3", 0.4).len();
    }
    assert_eq!(flagged, 0);
}
