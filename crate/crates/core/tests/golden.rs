//! Phase-plane rasters against committed images. `PHASESCAN_BLESS=1` rewrites them.

use std::fs;
use std::path::{Path, PathBuf};

use phasescan_core::phasescan::{phase_raster, CURVE_NEGATIVE, CURVE_POSITIVE, CURVE_UNSIGNED};
use phasescan_core::{run_scan, Raster, ScanSpec};

const BUDGET: f64 = 0.02;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn is_curve(c: [u8; 3]) -> bool {
    [CURVE_POSITIVE, CURVE_NEGATIVE, CURVE_UNSIGNED].contains(&c)
}

/// Fraction of pixels that differ, skipping anything within one pixel of a curve in either image.
fn disagreement(a: &Raster, b: &Raster) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height));
    let near_curve = |x: usize, y: usize| {
        (x.saturating_sub(1)..=(x + 1).min(a.width - 1))
            .any(|i| (y.saturating_sub(1)..=(y + 1).min(a.height - 1)).any(|j| is_curve(a.get(i, j)) || is_curve(b.get(i, j))))
    };
    let (mut compared, mut differ) = (0, 0);
    for y in 0..a.height {
        for x in 0..a.width {
            if near_curve(x, y) {
                continue;
            }
            compared += 1;
            differ += (a.get(x, y) != b.get(x, y)) as usize;
        }
    }
    differ as f64 / compared as f64
}

fn check(name: &str) {
    let text = fs::read_to_string(root().join(format!("configs/{name}.cfg"))).unwrap();
    let spec = ScanSpec::parse(&text).unwrap();
    let img = phase_raster(&run_scan(&spec).unwrap(), 1);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}.ppm"));
    if std::env::var_os("PHASESCAN_BLESS").is_some_and(|v| v == "1") {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        img.write_ppm(fs::File::create(&golden).unwrap()).unwrap();
        return;
    }
    let expected = Raster::read_ppm(&fs::read_to_string(&golden).unwrap()).unwrap();
    let d = disagreement(&img, &expected);
    assert!(d <= BUDGET, "{name}: {:.2}% of pixels away from curves differ", 100.0 * d);
}

#[test]
fn twisted_alpha_beta() {
    check("twisted_alpha_beta");
}

#[test]
fn twisted_gamma_alpha() {
    check("twisted_gamma_alpha");
}

#[test]
fn real_alpha_beta_g025() {
    check("real_alpha_beta_g025");
}

#[test]
fn real_alpha_gamma_b050() {
    check("real_alpha_gamma_b050");
}

#[test]
fn real_alpha_beta_g000() {
    check("real_alpha_beta_g000");
}

#[test]
fn real_alpha_gamma_b144() {
    check("real_alpha_gamma_b144");
}

#[test]
fn disagreement_ignores_curve_neighbourhoods() {
    let mut a = Raster::new(10, 10, [255, 255, 255]);
    let mut b = a.clone();
    a.set(5, 5, CURVE_POSITIVE);
    b.set(4, 4, [244, 160, 160]);
    assert_eq!(disagreement(&a, &b), 0.0);
    b.set(0, 0, [244, 160, 160]);
    assert!(disagreement(&a, &b) > 0.0);
}
