use phantom::dispersion::{DielectricSpectrum, FrequencyGrid, PropertySelector};
use phantom::materials::{
    interpolate_spectrum, parse_measurement_csv, validate_monotone_in_concentration, Concentration, IngestOptions,
    MaterialDatabase, MaterialSample, Method,
};
use phantom::reference::reference_dataset;
use proptest::prelude::*;

fn stored_grid() -> FrequencyGrid {
    FrequencyGrid::log_spaced(1e5, 1e8, 25).unwrap()
}

/// Nine spectra, strictly decreasing in concentration at every frequency.
fn monotone_db() -> impl Strategy<Value = MaterialDatabase> {
    prop::collection::vec(prop::collection::vec((0.01..0.5f64, 0.01..0.5f64), 25), 9).prop_map(|steps| {
        let g = stored_grid();
        let mut eps = vec![2000.0; 25];
        let mut sigma = vec![5.0; 25];
        let mut samples = Vec::new();
        for (k, row) in steps.iter().enumerate() {
            for (i, (de, ds)) in row.iter().enumerate() {
                eps[i] *= (-de).exp();
                sigma[i] *= (-ds).exp();
            }
            let spectrum = DielectricSpectrum::new(g.clone(), eps.clone(), sigma.clone()).unwrap();
            samples.push(MaterialSample::synthetic(
                Method::OilOnly,
                Concentration::from_percent(10.0 * (k + 1) as f64).unwrap(),
                spectrum,
            ));
        }
        MaterialDatabase::from_samples(samples).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolation_stays_between_neighbours(db in monotone_db(), probes in prop::collection::vec((0.1..0.9f64, 5.0..8.0f64), 16)) {
        let snapshot = db.snapshot(Method::OilOnly);
        for (c, logf) in probes {
            let grid = FrequencyGrid::new(vec![10f64.powf(logf)]).unwrap();
            let s = interpolate_spectrum(&db, Method::OilOnly, Concentration::new(c).unwrap(), &grid).unwrap();
            let lo = snapshot.iter().rev().find(|x| x.concentration().fraction() <= c).unwrap();
            let hi = snapshot.iter().find(|x| x.concentration().fraction() >= c).unwrap();
            for p in PropertySelector::ALL {
                let a = lo.spectrum().resample(&grid).unwrap().values(p)[0];
                let b = hi.spectrum().resample(&grid).unwrap().values(p)[0];
                let v = s.spectrum().values(p)[0];
                prop_assert!(v <= a * (1.0 + 1e-12) && v >= b * (1.0 - 1e-12), "{p} at c={c}: {v} not in [{b}, {a}]");
            }
        }
    }

    #[test]
    fn knots_are_reproduced(db in monotone_db(), k in 1usize..=9) {
        let c = Concentration::from_percent(10.0 * k as f64).unwrap();
        let target = FrequencyGrid::log_spaced(2e5, 5e7, 17).unwrap();
        let got = interpolate_spectrum(&db, Method::OilOnly, c, &target).unwrap();
        let stored = db.snapshot(Method::OilOnly)[k - 1].spectrum().resample(&target).unwrap();
        prop_assert_eq!(got.spectrum(), &stored);
    }

    #[test]
    fn resampling_to_own_grid_is_identity(db in monotone_db()) {
        for s in db.samples() {
            prop_assert_eq!(&s.spectrum().resample(s.spectrum().grid()).unwrap(), s.spectrum());
        }
    }

    #[test]
    fn replicate_column_order_does_not_matter(
        values in prop::collection::vec(prop::collection::vec((1.0..500.0f64, 0.01..3.0f64), 3), 4),
        perm in Just([2usize, 0, 1]).prop_shuffle(),
    ) {
        let freqs = [1e5, 1e6, 1e7, 1e8];
        let render = |order: &[usize]| {
            let mut s = String::from("frequency_hz");
            for (pos, _) in order.iter().enumerate() {
                s.push_str(&format!(",rel_permittivity_{}", pos + 1));
            }
            for (pos, _) in order.iter().enumerate() {
                s.push_str(&format!(",conductivity_s_per_m_{}", pos + 1));
            }
            s.push('\n');
            for (f, row) in freqs.iter().zip(&values) {
                s.push_str(&f.to_string());
                for &r in order {
                    s.push_str(&format!(",{}", row[r].0));
                }
                for &r in order {
                    s.push_str(&format!(",{}", row[r].1));
                }
                s.push('\n');
            }
            s
        };
        let a = parse_measurement_csv(render(&[0, 1, 2]).as_bytes(), &IngestOptions::default()).unwrap();
        let b = parse_measurement_csv(render(&perm).as_bytes(), &IngestOptions::default()).unwrap();
        prop_assert_eq!(a.spectrum, b.spectrum);
    }
}

#[test]
fn reference_dataset_is_monotone() {
    let db = reference_dataset();
    for m in Method::ALL {
        let r = validate_monotone_in_concentration(db, m, &FrequencyGrid::default()).unwrap();
        assert!(r.is_consistent(), "{m}: {} violations", r.violations.len());
    }
}

#[test]
fn swapped_pair_is_flagged() {
    let db = reference_dataset();
    let mut samples: Vec<MaterialSample> = db.snapshot(Method::OilKerosene).into_iter().cloned().collect();
    let (c2, c3) = (samples[1].concentration(), samples[2].concentration());
    let (s2, s3) = (samples[1].spectrum().clone(), samples[2].spectrum().clone());
    samples[1] = MaterialSample::synthetic(Method::OilKerosene, c2, s3);
    samples[2] = MaterialSample::synthetic(Method::OilKerosene, c3, s2);
    let swapped = MaterialDatabase::from_samples(samples).unwrap();
    let r = validate_monotone_in_concentration(&swapped, Method::OilKerosene, &FrequencyGrid::default()).unwrap();
    assert!(!r.is_consistent());
    assert!(r
        .violations
        .iter()
        .all(|v| v.lower_concentration == c2 && v.higher_concentration == c3));
    assert_eq!(r.violations.len(), 2 * 201);
}
