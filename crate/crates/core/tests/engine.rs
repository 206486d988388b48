use fcvbw::{design, DesignOptions, EngineMode, FilterSpec, OlsEngine, TailPolicy};
use fcvbw_oracle::{random_signal, OracleConfig};

fn spec() -> FilterSpec {
    let mut s = FilterSpec::new(0.25, 0.75, 0.859375);
    s.length_override = Some(31);
    s
}

#[test]
fn single_precision_tracks_double() {
    let d64 = design::<f64>(&spec(), DesignOptions::default()).unwrap();
    let v32 = d64.values.cast::<f32>();
    let bin = *d64.disc.bins().start();
    let x = random_signal(&mut OracleConfig::default().rng(), 2000);
    let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();

    let y64 = OlsEngine::new(&d64.disc, &d64.values, bin, EngineMode::Symmetric)
        .unwrap()
        .run(&x, &[], TailPolicy::Full)
        .unwrap();
    let y32 = OlsEngine::new(&d64.disc, &v32, bin, EngineMode::Symmetric)
        .unwrap()
        .run(&x32, &[], TailPolicy::Full)
        .unwrap();
    assert_eq!(y64.len(), y32.len());
    let peak = y64.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let err = y64.iter().zip(&y32).fold(0.0f64, |a, (p, q)| a.max((p - *q as f64).abs()));
    assert!(err < 1e-5 * peak, "{err} vs {peak}");
}

#[test]
fn single_precision_design_is_close() {
    let d64 = design::<f64>(&spec(), DesignOptions::default()).unwrap();
    let d32 = design::<f32>(&spec(), DesignOptions::default()).unwrap();
    let err = d64
        .values
        .values()
        .iter()
        .zip(d32.values.values())
        .fold(0.0f64, |a, (p, q)| a.max((p - *q as f64).abs()));
    assert!(err < 1e-3, "{err}");
    // The objective is flat near the optimum; energy is what matters.
    let m32 = d32.design_metrics().unwrap().aggregate;
    let m64 = d64.design_metrics().unwrap().aggregate;
    assert!((m32.sbe_db - m64.sbe_db).abs() < 0.5);
}

#[test]
fn chunking_does_not_change_output() {
    let d = design::<f64>(&spec(), DesignOptions::default()).unwrap();
    let bin = *d.disc.bins().end();
    let x = random_signal(&mut OracleConfig::default().rng(), 1500);
    let mut engine = OlsEngine::new(&d.disc, &d.values, bin, EngineMode::Conventional).unwrap();
    let whole = engine.run(&x, &[], TailPolicy::Full).unwrap();

    let mut pieces = Vec::new();
    for chunk in x.chunks(37) {
        engine.push(chunk, &mut pieces).unwrap();
    }
    engine.flush(TailPolicy::Full, &mut pieces).unwrap();
    assert_eq!(whole.len(), pieces.len());
    for (a, b) in whole.iter().zip(&pieces) {
        assert!((a - b).abs() < 1e-14);
    }
}
