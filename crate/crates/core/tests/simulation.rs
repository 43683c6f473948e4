use cos2a::ops::spa_select;
use cos2a::pipeline::PipelineConfig;
use cos2a::rough::{run_unfolded_admm, spectral_upsample_init, Denoiser, DenoiserSpec, UnfoldConfig};
use cos2a::sensor::{
    build_response, calibrate_gain, nearest_band_indices, simulate_product, uniform_wavelengths,
};
use cos2a::synth::{generate_scene, SceneSpec};
use cos2a::{DMatrix, GsdClass, SensorProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene(seed: u64, n: usize) -> cos2a::synth::Scene {
    generate_scene(&SceneSpec {
        seed,
        n_endmembers: n,
        ..SceneSpec::default()
    })
    .unwrap()
}

#[test]
fn scene_matrix_has_endmember_rank() {
    let y = scene(42, 5).cube.to_matrix();
    let sv = y.singular_values();
    let top = sv.max();
    assert_eq!(sv.iter().filter(|&&s| s > 1e-8 * top).count(), 5);
}

#[test]
fn spa_finds_the_pure_pixels() {
    let s = scene(7, 5);
    let mut picked = spa_select(&s.cube.to_matrix(), 5).unwrap().indices;
    let mut pure = s.pure_pixels.clone();
    picked.sort();
    pure.sort();
    assert_eq!(picked, pure);
}

#[test]
fn simulated_bands_are_block_constant() {
    let product = simulate_product(&scene(0, 5).cube, &SensorProfile::sentinel2a()).unwrap();
    let (h, w) = (product.height(), product.width());
    for (b, spec) in product.band_specs().iter().enumerate() {
        let r = spec.gsd_class.factor();
        let band = product.band(b);
        for y in 0..(h / r) * r {
            for x in 0..(w / r) * r {
                let corner = band[(y / r * r) * w + x / r * r];
                assert_eq!(band[y * w + x], corner, "band {} at ({y}, {x})", spec.name);
            }
        }
    }
    assert_eq!(product.count_by_gsd(GsdClass::M60), 2);
}

#[test]
fn gain_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let a: Vec<f64> = (0..12).map(|_| rng.gen()).collect();
        let s: Vec<f64> = a.iter().map(|v| 3.7 * v + rng.gen_range(-0.1..0.1)).collect();
        let cost = |g: f64| a.iter().zip(&s).map(|(x, y)| (g * x - y).powi(2)).sum::<f64>();
        let (mut best, mut best_cost) = (0.0, f64::INFINITY);
        for i in 0..=10_000_000u64 {
            let g = i as f64 * 1e-6;
            let c = cost(g);
            if c < best_cost {
                best = g;
                best_cost = c;
            }
        }
        let got = calibrate_gain(&a, &s).unwrap();
        assert!((got - best).abs() < 1e-5, "{got} vs {best}");
    }
}

#[test]
fn nearest_bands_match_linear_scan() {
    let profile = SensorProfile::sentinel2a();
    let wl = uniform_wavelengths(172, 400.0, 2500.0);
    let got = nearest_band_indices(&wl, &profile);
    for (band, i) in profile.bands.iter().zip(got) {
        let d = (wl[i] - band.center_nm).abs();
        assert!(wl.iter().all(|w| (w - band.center_nm).abs() >= d), "{}", band.name);
    }
}

#[test]
fn box_denoised_rough_solution_is_clamped() {
    let s = scene(3, 5);
    let profile = SensorProfile::sentinel2a();
    let product = simulate_product(&s.cube, &profile).unwrap();
    let d = build_response(&profile, &PipelineConfig::default().wavelengths()).unwrap();
    let y_s = product.to_matrix();
    let cfg = UnfoldConfig {
        denoiser: DenoiserSpec::Box { window: 3 },
        ..UnfoldConfig::default()
    };
    let init = spectral_upsample_init(&y_s, &d, cfg.init).unwrap();
    let denoiser = Denoiser::from_spec(&cfg.denoiser, &init).unwrap();
    let out = run_unfolded_admm(&y_s, &d, (64, 64), &cfg, &denoiser).unwrap();
    assert_eq!(out.y_de.shape(), (172, 64 * 64));
    assert_eq!(out.stages.len(), 4);
    assert!(out.y_de.iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn ridge_shrinks_as_eta_grows() {
    use cos2a::response::{estimate_response, RidgeConfig};
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let y = DMatrix::from_fn(32, 1024, |_, _| rng.gen::<f64>());
    let d_true = DMatrix::from_fn(4, 32, |_, _| rng.gen::<f64>());
    let target = &d_true * &y;
    let norms: Vec<f64> = [1e-4, 1.0, 1e4]
        .iter()
        .map(|&eta| {
            let cfg = RidgeConfig {
                eta,
                ..RidgeConfig::default()
            };
            estimate_response(&y, &target, &cfg).unwrap().d.norm()
        })
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
}
