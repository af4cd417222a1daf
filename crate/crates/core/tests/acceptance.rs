//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the process exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 7`.

use std::time::Instant;

use lifisim::blockage::{blockage_mask, segment_blocked, Blocker, BlockerKind};
use lifisim::channel::{build_environment_mesh, transfer_matrix, NlosModel, RadiositySolver};
use lifisim::geometry::{rotation_matrix, DeviceVariant, RotationAngles, Vec2, Vec3};
use lifisim::harness::{
    cdf_map_to_dir, orwp_to_dir, run_ber_sweep, run_cdf_map, run_uplink_eval, uplink_to_dir,
    ber_sweep_to_dir, with_workers, BerRecord, DownlinkResult, UplinkResult, UplinkSummary,
};
use lifisim::math::first_crossing;
use lifisim::orientation::{ar1_params, ar1_step, sample_static_orientation, OrientationStats};
use lifisim::scenario::{Activity, BerVariant, Direction, Scenario, Simulator};
use lifisim::sm::{build_constellation, build_multiplexing, ml_detect};
use lifisim::uplink::{
    constellation_input_variance, high_snr_gaps, lower_bound_l1, lower_bound_l2, mi_monte_carlo,
    rate_bounds, BoundOptions, L1Exponent,
};
use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> lifisim::Result<Outcome>;

fn main() {
    let criteria: [(u32, &str, Check); 8] = [
        (1, "high-SNR gap values", gaps),
        (2, "high-SNR convergence of the rate bounds", convergence),
        (3, "rate bounds below the mutual information", bounds_below_mi),
        (4, "union bound meets Monte Carlo at BER 1e-2", union_bound_tightness),
        (5, "downlink orderings", downlink_orderings),
        (6, "uplink orderings", uplink_orderings),
        (7, "orientation statistics", orientation_statistics),
        (8, "property suites", property_suites),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n} {verdict} [{name}] {} ({:.1} s)",
            outcome.detail,
            t0.elapsed().as_secs_f64()
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_h(r: &mut ChaCha8Rng, n_r: usize, n_t: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_r, n_t, |_, _| r.random::<f64>())
}

// ---------------------------------------------------------------------------------------------

fn gaps() -> lifisim::Result<Outcome> {
    let cases = [((4, 4, 16), (3.5416, 0.0319)), ((4, 16, 4), (0.8854, 4.4850))];
    let mut pass = true;
    let mut detail = Vec::new();
    for ((m, n_t, n_r), (want1, want2)) in cases {
        let (d1, d2) = high_snr_gaps(m, n_t, n_r)?;
        pass &= (d1 - want1).abs() <= 5e-4 && (d2 - want2).abs() <= 5e-4;
        detail.push(format!("({m},{n_t},{n_r}) -> ({d1:.4}, {d2:.4})"));
    }
    Ok(Outcome::new(pass, detail.join(", ")))
}

fn convergence() -> lifisim::Result<Outcome> {
    let (m, n_t, n_r) = (4, 4, 16);
    let c = build_constellation(m, n_t, 1.0)?;
    let mut r = rng(20);
    // a well-conditioned draw, scaled to unit mean column energy
    let h = loop {
        let h = uniform_h(&mut r, n_r, n_t);
        let sv = h.singular_values();
        let cond = sv.max() / sv.min();
        if cond < 5.0 {
            break &h * (n_t as f64 / h.norm_squared()).sqrt();
        }
    };
    let sigma2 = 1e-6;
    let (d1, d2) = high_snr_gaps(m, n_t, n_r)?;
    let target = d1.min(d2);
    let eta_tse = c.bits() as f64;
    let reduced = rate_bounds(&c, &h, sigma2, 1.0, 1.0, BoundOptions::default())?;
    let full = rate_bounds(
        &c,
        &h,
        sigma2,
        1.0,
        1.0,
        BoundOptions {
            reduce_to_rank: false,
            ..BoundOptions::default()
        },
    )?;
    let gap = eta_tse - reduced.r_up;
    let gap_full = eta_tse - full.r_up;
    Ok(Outcome::new(
        (gap - target).abs() <= 0.05,
        format!(
            "gap {gap:.4} (signal subspace; {gap_full:.4} on the full 16x4 channel), \
             L1 {:.4}, L2 {:.4}, expected min(D1, D2) = {target:.4}",
            reduced.l1, reduced.l2
        ),
    ))
}

fn bounds_below_mi() -> lifisim::Result<Outcome> {
    let c = build_constellation(4, 4, 1.0)?;
    let sx = constellation_input_variance(&c);
    let mut r = rng(30);
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut checks = 0;
    for k in 0..100 {
        let n_r = if k % 2 == 0 { 4 } else { 16 };
        let h = uniform_h(&mut r, n_r, 4);
        for snr_db in [0.0, 10.0, 20.0, 30.0, 40.0] {
            let sigma2 = 10f64.powf(-snr_db / 10.0);
            let mi = mi_monte_carlo(&c, &h, sigma2, 100_000, &mut r)?;
            let l1 = lower_bound_l1(&c, &h, sigma2, L1Exponent::Quarter)?.max(0.0);
            let l2 = lower_bound_l2(&c, &h, sigma2, sx)?.max(0.0);
            let limit = mi.bits + 3.0 * mi.stderr;
            for l in [l1, l2] {
                checks += 1;
                worst = worst.max(l - limit);
                if l > limit + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    Ok(Outcome::new(
        violations == 0,
        format!("{violations}/{checks} violations, max(bound - MI - 3 se) = {worst:.4} bit"),
    ))
}

fn union_bound_tightness() -> lifisim::Result<Outcome> {
    let mut s = Scenario::default();
    s.nlos.resolution = 0.25;
    s.ber_sweep.mc_symbols = 1_000_000;
    s.ber_sweep.variants = vec![BerVariant::default()];
    let sim = Simulator::new(&s)?;
    let rows = run_ber_sweep(&sim)?;
    let x: Vec<f64> = rows.iter().map(|r| r.snr_rx_db).collect();
    let bound: Vec<f64> = rows.iter().map(|r| r.ber_bound).collect();
    let mc: Vec<f64> = rows.iter().map(|r| r.ber_mc).collect();
    let a = first_crossing(&x, &bound, 1e-2, true);
    let b = first_crossing(&x, &mc, 1e-2, true);
    Ok(match (a, b) {
        (Some(a), Some(b)) => Outcome::new(
            (a - b).abs() <= 1.0,
            format!("bound crosses at {a:.2} dB, Monte Carlo at {b:.2} dB (diff {:.2} dB)", (a - b).abs()),
        ),
        _ => Outcome::new(false, format!("no crossing (bound {a:?}, MC {b:?})")),
    })
}

// ---------------------------------------------------------------------------------------------

fn reduced_cdf_scenario(device: DeviceVariant, spectral_efficiency: u32) -> Scenario {
    let mut s = Scenario::default();
    s.device = device;
    s.nlos.resolution = 0.25;
    s.cdf.grid_step = 1.0;
    s.cdf.directions = 8;
    s.cdf.orientations_per_point = 50;
    s.targets.spectral_efficiency = spectral_efficiency;
    s
}

fn cdf_map(s: &Scenario) -> lifisim::Result<DownlinkResult> {
    run_cdf_map(&Simulator::new(s)?, &mut |_| Ok(()))
}

fn asm_dominates_fixed(res: &DownlinkResult) -> (bool, usize) {
    let asm = res.values_of("asm").expect("asm row");
    let mut bad = 0;
    for scheme in res.schemes.iter().filter(|s| s.starts_with("sm_na")) {
        let v = res.values_of(scheme).expect("scheme row");
        bad += asm.iter().zip(v).filter(|(a, b)| **a > **b + 1e-9).count();
    }
    (bad == 0, bad)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// LOS-only Monte-Carlo BER at L1 for `device`; returns the largest BER at SNR >= 40 dB.
fn los_floor(device: DeviceVariant) -> lifisim::Result<(f64, f64)> {
    let mut s = Scenario::default();
    s.device = device;
    s.nlos.enabled = false;
    s.ber_sweep.mc_symbols = 100_000;
    s.ber_sweep.variants = vec![BerVariant {
        label: "los".into(),
        nlos: false,
        ..BerVariant::default()
    }];
    let rows: Vec<BerRecord> = run_ber_sweep(&Simulator::new(&s)?)?;
    let high = rows.iter().filter(|r| r.snr_rx_db >= 40.0);
    let (mc, bound) = high.fold((0.0f64, 0.0f64), |(a, b), r| (a.max(r.ber_mc), b.max(r.ber_bound)));
    Ok((mc, bound))
}

fn downlink_orderings() -> lifisim::Result<Outcome> {
    let mdr = cdf_map(&reduced_cdf_scenario(DeviceVariant::Mdr, 5))?;
    let sr = cdf_map(&reduced_cdf_scenario(DeviceVariant::Sr, 5))?;
    let med = |r: &DownlinkResult| r.summary_of("asm").map(|s| s.median_rx_db).unwrap_or(f64::NAN);
    let (m_mdr, m_sr) = (med(&mdr), med(&sr));
    let a = m_sr - m_mdr >= 5.0;

    let (b_mdr, bad_mdr) = asm_dominates_fixed(&mdr);
    let (b_sr, bad_sr) = asm_dominates_fixed(&sr);

    let r4 = cdf_map(&reduced_cdf_scenario(DeviceVariant::Mdr, 4))?;
    let asm4 = sorted(r4.values_of("asm").expect("asm row"));
    let mimo4 = sorted(r4.values_of("mimo").expect("mimo row"));
    let c_bad = asm4.iter().zip(&mimo4).filter(|(a, b)| **a > **b + 1e-9).count();
    let med4 = |v: &[f64]| v[v.len() / 2];

    let (mc_mdr, ub_mdr) = los_floor(DeviceVariant::Mdr)?;
    let (mc_sr, ub_sr) = los_floor(DeviceVariant::Sr)?;
    let d = mc_mdr > 1e-3 && mc_sr > 1e-3;

    let pass = a && b_mdr && b_sr && c_bad == 0 && d;
    Ok(Outcome::new(
        pass,
        format!(
            "(a) ASM median MDR {m_mdr:.2} dB vs SR {m_sr:.2} dB, gap {:.2} dB [{}]; \
             (b) realisations where ASM exceeds a fixed N_a: MDR {bad_mdr}, SR {bad_sr} [{}]; \
             (c) R=4 sorted ASM above MIMO at {c_bad} of {} quantiles, medians {:.2} vs {:.2} dB [{}]; \
             (d) LOS-only max BER at >= 40 dB: MDR {mc_mdr:.2e} (bound {ub_mdr:.2e}), \
             SR {mc_sr:.2e} (bound {ub_sr:.2e}) [{}]",
            m_sr - m_mdr,
            ok(a),
            ok(b_mdr && b_sr),
            asm4.len(),
            med4(&asm4),
            med4(&mimo4),
            ok(c_bad == 0),
            ok(d)
        ),
    ))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "not met"
    }
}

// ---------------------------------------------------------------------------------------------

fn uplink_run(device: DeviceVariant, activity: Activity) -> lifisim::Result<UplinkResult> {
    let mut s = Scenario::default();
    s.direction = Direction::Uplink;
    s.device = device;
    s.activity = activity;
    s.cdf.grid_step = 1.0;
    s.cdf.directions = 8;
    s.cdf.orientations_per_point = 50;
    s.orwp.waypoints = 200;
    run_uplink_eval(&Simulator::new(&s)?, &mut |_| Ok(()))
}

/// Piecewise-linear interpolation on increasing `x`; `None` outside the range.
fn interp(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    if x.is_empty() || at < x[0] || at > x[x.len() - 1] {
        return None;
    }
    for i in 1..x.len() {
        if at <= x[i] {
            let span = x[i] - x[i - 1];
            let f = if span > 0.0 { (at - x[i - 1]) / span } else { 1.0 };
            return Some(y[i - 1] + f * (y[i] - y[i - 1]));
        }
    }
    Some(y[y.len() - 1])
}

/// Compare `better` against `worse` on a shared abscissa grid. Points where both values are
/// saturated (BER 0.5) or missing are skipped. Returns (points compared, points where
/// `better` is not strictly better).
fn compare_on_grid(
    better: (&[f64], &[f64]),
    worse: (&[f64], &[f64]),
    lower_is_better: bool,
    skip: impl Fn(f64, f64) -> bool,
) -> (usize, usize) {
    let lo = better.0[0].max(worse.0[0]);
    let hi = better.0[better.0.len() - 1].min(worse.0[worse.0.len() - 1]);
    let mut compared = 0;
    let mut bad = 0;
    if !(hi > lo) {
        return (0, 0);
    }
    let n = 60;
    for k in 0..=n {
        let at = lo + (hi - lo) * k as f64 / n as f64;
        let (Some(a), Some(b)) = (interp(better.0, better.1, at), interp(worse.0, worse.1, at)) else {
            continue;
        };
        if skip(a, b) {
            continue;
        }
        compared += 1;
        let fine = if lower_is_better { a < b } else { a > b };
        if !fine {
            bad += 1;
        }
    }
    (compared, bad)
}

fn saturated(a: f64, b: f64) -> bool {
    a >= 0.5 - 1e-9 && b >= 0.5 - 1e-9
}

fn columns(rows: &[&UplinkSummary], f: impl Fn(&UplinkSummary) -> f64) -> Vec<f64> {
    rows.iter().map(|r| f(r)).collect()
}

/// Mean BER against mean received SNR, as increasing-x arrays in log10 BER.
fn ber_vs_rx(res: &UplinkResult) -> (Vec<f64>, Vec<f64>) {
    let rows = res.curve("asm");
    (columns(&rows, |r| r.mean_rx_db), columns(&rows, |r| r.mean_ber.max(1e-300).log10()))
}

/// Energy efficiency against received spectral efficiency over the range where the rate is
/// positive and increasing.
fn ee_vs_rse(res: &UplinkResult) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in res.curve("asm") {
        if r.eta_rse > 0.0 && x.last().is_none_or(|&l| r.eta_rse > l) {
            x.push(r.eta_rse);
            y.push(r.eta_ee.log10());
        }
    }
    (x, y)
}

fn uplink_orderings() -> lifisim::Result<Outcome> {
    let mdt_sit = uplink_run(DeviceVariant::Mdr, Activity::Sitting)?;
    let st_sit = uplink_run(DeviceVariant::Sr, Activity::Sitting)?;
    let mdt_walk = uplink_run(DeviceVariant::Mdr, Activity::Walking)?;
    let st_walk = uplink_run(DeviceVariant::Sr, Activity::Walking)?;
    let log_half = 0.5f64.log10();
    let skip_log = |a: f64, b: f64| a >= log_half - 1e-9 && b >= log_half - 1e-9;

    let mut pass = true;
    let mut parts = Vec::new();

    // MDT below ST in BER at matched received SNR
    for (label, mdt, st) in [("sitting", &mdt_sit, &st_sit), ("walking", &mdt_walk, &st_walk)] {
        let (xa, ya) = ber_vs_rx(mdt);
        let (xb, yb) = ber_vs_rx(st);
        let (n, bad) = compare_on_grid((&xa, &ya), (&xb, &yb), true, skip_log);
        let fine = n > 0 && bad == 0;
        pass &= fine;
        parts.push(format!("MDT<ST BER at matched rx SNR, {label}: {bad}/{n} points violate [{}]", ok(fine)));
    }

    // walking below sitting in BER at matched symbol energy
    for (label, walk, sit) in [("MDT", &mdt_walk, &mdt_sit), ("ST", &st_walk, &st_sit)] {
        let w = walk.curve("asm");
        let s = sit.curve("asm");
        let mut n = 0;
        let mut bad = 0;
        for (a, b) in w.iter().zip(&s) {
            if saturated(a.mean_ber, b.mean_ber) {
                continue;
            }
            n += 1;
            if a.mean_ber >= b.mean_ber {
                bad += 1;
            }
        }
        let fine = n > 0 && bad == 0;
        pass &= fine;
        let (xa, ya) = ber_vs_rx(walk);
        let (xb, yb) = ber_vs_rx(sit);
        let (n_rx, bad_rx) = compare_on_grid((&xa, &ya), (&xb, &yb), true, skip_log);
        parts.push(format!(
            "walking<sitting BER at matched E_s, {label}: {bad}/{n} points violate [{}] \
             (at matched rx SNR, for information: {bad_rx}/{n_rx})",
            ok(fine)
        ));
    }

    // MDT above ST in energy efficiency at matched received spectral efficiency
    for (label, mdt, st) in [("sitting", &mdt_sit, &st_sit), ("walking", &mdt_walk, &st_walk)] {
        let (xa, ya) = ee_vs_rse(mdt);
        let (xb, yb) = ee_vs_rse(st);
        let (n, bad) = compare_on_grid((&xa, &ya), (&xb, &yb), false, |_, _| false);
        let fine = n > 0 && bad == 0;
        pass &= fine;
        parts.push(format!("MDT>ST energy efficiency, {label}: {bad}/{n} points violate [{}]", ok(fine)));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

// ---------------------------------------------------------------------------------------------

fn orientation_statistics() -> lifisim::Result<Outcome> {
    let stats = OrientationStats::sitting();
    let mut r = rng(70);
    let n = 1_000_000;
    let beta: Vec<f64> = (0..n)
        .map(|_| sample_static_orientation(&stats, 90.0, &mut r).beta)
        .collect();
    let mean = beta.iter().sum::<f64>() / n as f64;
    let m2 = beta.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / n as f64;
    let m4 = beta.iter().map(|b| (b - mean).powi(4)).sum::<f64>() / n as f64;
    let std = m2.sqrt();
    let kurt = m4 / (m2 * m2);
    let static_ok = (mean - 40.78).abs() <= 0.02 * 40.78
        && (std - 2.39).abs() <= 0.02 * 2.39
        && (kurt - 6.0).abs() <= 0.05 * 6.0;

    // AR(1) at a fifth of the coherence time, autocorrelation read at lag five
    let walking = OrientationStats::walking();
    let lag = 5;
    let steps = 1_000_000;
    let mut rhos = Vec::new();
    for a in [walking.alpha, walking.beta, walking.gamma] {
        let p = ar1_params(a.mean, a.std, a.coherence_time, a.coherence_time / lag as f64)?;
        let mut x = a.mean + a.std * r.sample::<f64, _>(StandardNormal);
        let seq: Vec<f64> = (0..steps)
            .map(|_| {
                x = ar1_step(x, &p, &mut r);
                x
            })
            .collect();
        let mu = seq.iter().sum::<f64>() / steps as f64;
        let var = seq.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / steps as f64;
        let cov = seq
            .windows(lag + 1)
            .map(|w| (w[0] - mu) * (w[lag] - mu))
            .sum::<f64>()
            / (steps - lag) as f64;
        rhos.push(cov / var);
    }
    let ar_ok = rhos.iter().all(|r| (r - 0.05).abs() <= 0.02);
    Ok(Outcome::new(
        static_ok && ar_ok,
        format!(
            "sitting pitch mean {mean:.3}, std {std:.3}, kurtosis {kurt:.3}; \
             walking lag-Tc autocorrelation {:.4}, {:.4}, {:.4}",
            rhos[0], rhos[1], rhos[2]
        ),
    ))
}

// ---------------------------------------------------------------------------------------------

fn rotation_suite(r: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let a = RotationAngles::new(
            r.random_range(-360.0..360.0),
            r.random_range(-360.0..360.0),
            r.random_range(-360.0..360.0),
        );
        let m = rotation_matrix(a);
        let err = (m.transpose() * m - Matrix3::identity()).abs().max();
        worst = worst.max(err).max((m.determinant() - 1.0).abs());
    }
    worst
}

fn random_point(r: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(r.random_range(0.0..5.0), r.random_range(0.0..5.0), r.random_range(0.0..3.0))
}

fn random_blocker(r: &mut ChaCha8Rng) -> Blocker {
    Blocker {
        center: Vec2::new(r.random_range(0.5..4.5), r.random_range(0.5..4.5)),
        facing_deg: r.random_range(0.0..360.0),
        length: 0.7,
        width: 0.2,
        height: 1.75,
        kind: BlockerKind::NonUser,
    }
}

/// (sampling-oracle misses, monotonicity violations) over 1000 random cases each.
fn blockage_suite(r: &mut ChaCha8Rng) -> (usize, usize) {
    let mut misses = 0;
    for _ in 0..1000 {
        let (a, b, blk) = (random_point(r), random_point(r), random_blocker(r));
        let samples = 10_000;
        let hit = (1..samples).any(|k| blk.contains(&(a + (b - a) * (k as f64 / samples as f64))));
        if hit && !segment_blocked(&a, &b, &blk) {
            misses += 1;
        }
    }
    let mut non_monotone = 0;
    for _ in 0..1000 {
        let tx: Vec<Vec3> = (0..3).map(|_| random_point(r)).collect();
        let rx: Vec<Vec3> = (0..3).map(|_| random_point(r)).collect();
        let mut bs: Vec<Blocker> = (0..r.random_range(0..4)).map(|_| random_blocker(r)).collect();
        let before = blockage_mask(&tx, &rx, &bs);
        bs.push(random_blocker(r));
        let after = blockage_mask(&tx, &rx, &bs);
        if before.iter().zip(after.iter()).any(|(x, y)| *x && !*y) {
            non_monotone += 1;
        }
    }
    (misses, non_monotone)
}

/// Relative residual of the radiosity solve for the L1 geometry on the 0.25 m mesh.
fn radiosity_residual() -> lifisim::Result<f64> {
    let mut s = Scenario::default();
    s.nlos.resolution = 0.25;
    let sim = Simulator::new(&s)?;
    let model = sim.nlos_model().expect("downlink with NLOS");
    let src = s.optics.source()?;
    let t = model.incident(sim.ap_poses(), &src, &[]);
    let x = model.radiosity().solve(&t)?;
    let mut eg = transfer_matrix(model.mesh());
    for (j, el) in model.mesh().elements.iter().enumerate() {
        eg.column_mut(j).scale_mut(el.reflectivity);
    }
    let residual = &x - &eg * &x - &t;
    Ok(residual.norm() / t.norm())
}

/// Relative deviations from the exact diffuse gain at reflectivity 0.05, for the L1 geometry
/// (MDR photodiodes, all 16 APs).
struct NeumannDeviation {
    /// Worst single link, single reflection only.
    first_worst: f64,
    /// All links summed, single reflection only.
    first_total: f64,
    /// Worst single link, reflections up to fourth order.
    four_terms_worst: f64,
}

fn neumann_check() -> lifisim::Result<NeumannDeviation> {
    let mut s = Scenario::default();
    s.room.rho_wall = 0.05;
    s.room.rho_floor = 0.05;
    s.room.rho_ceiling = 0.05;
    s.nlos.enabled = false;
    let sim = Simulator::new(&s)?;
    let model = NlosModel::new(build_environment_mesh(&s.room, 0.25)?, RadiositySolver::Lu)?;
    let src = s.optics.source()?;
    let pose = sim.mean_pose(Vec2::new(2.5, 2.5), 90.0);
    let rx = sim.device_elements(&pose);
    let t = model.incident(sim.ap_poses(), &src, &[]);
    let mut gr = model.outgoing(&rx, &src, &[]);
    for (mut row, el) in gr.row_iter_mut().zip(&model.mesh().elements) {
        row *= el.reflectivity;
    }
    let exact = model.radiosity().gains(&t, &model.outgoing(&rx, &src, &[]))?;
    let first = gr.tr_mul(&t);
    let mut eg = transfer_matrix(model.mesh());
    for (j, el) in model.mesh().elements.iter().enumerate() {
        eg.column_mut(j).scale_mut(el.reflectivity);
    }
    let mut term = t.clone();
    let mut sum = t.clone();
    for _ in 1..4 {
        term = &eg * &term;
        sum += &term;
    }
    let truncated = gr.tr_mul(&sum);
    let mut worst_first = 0.0f64;
    let mut worst_trunc = 0.0f64;
    for ((e, f), n) in exact.iter().zip(first.iter()).zip(truncated.iter()) {
        if *f > 0.0 {
            worst_first = worst_first.max((e - f).abs() / f);
            worst_trunc = worst_trunc.max((e - n).abs() / e);
        }
    }
    Ok(NeumannDeviation {
        first_worst: worst_first,
        first_total: (exact.sum() - first.sum()).abs() / first.sum(),
        four_terms_worst: worst_trunc,
    })
}

fn constellation_power() -> lifisim::Result<f64> {
    let mut worst = 0.0f64;
    for intensity in [1.0, 0.37, 2.5] {
        for m in [2, 4, 8, 16] {
            for n_a in [1, 2, 4, 8, 16] {
                let c = build_constellation(m, n_a, intensity)?;
                let mean = c.points().column_iter().map(|col| col.sum()).sum::<f64>() / c.len() as f64;
                worst = worst.max((mean - intensity).abs() / intensity);
            }
            let c = build_multiplexing(m.min(4), 4, intensity)?;
            let mean = c.points().column_iter().map(|col| col.sum()).sum::<f64>() / c.len() as f64;
            worst = worst.max((mean - intensity).abs() / intensity);
        }
    }
    Ok(worst)
}

fn ml_suite(r: &mut ChaCha8Rng) -> lifisim::Result<usize> {
    let c = build_constellation(4, 4, 1.0)?;
    let mut mismatches = 0;
    for _ in 0..1000 {
        let h = uniform_h(r, 4, 4);
        let sent = r.random_range(0..c.len());
        let noise = DVector::from_fn(4, |_, _| 0.2 * r.sample::<f64, _>(StandardNormal));
        let y = &h * c.points().column(sent) + noise;
        let brute = (0..c.len())
            .map(|k| (&y - &h * c.points().column(k)).norm_squared())
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, d)| if d < acc.1 { (k, d) } else { acc })
            .0;
        if ml_detect(&y, &h, &c)? != brute {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

/// Files whose bytes differ between one and three worker threads.
fn determinism_suite() -> lifisim::Result<Vec<String>> {
    let mut downlink = Scenario::default();
    downlink.nlos.resolution = 1.0;
    downlink.cdf.grid_step = 1.25;
    downlink.cdf.directions = 4;
    downlink.cdf.orientations_per_point = 3;
    downlink.ber_sweep.mc_symbols = 20_000;
    let mut walking = downlink.clone();
    walking.activity = Activity::Walking;
    walking.orwp.waypoints = 3;
    walking.orwp.max_samples = Some(40);
    let mut uplink = downlink.clone();
    uplink.direction = Direction::Uplink;

    let mut differing = Vec::new();
    let runs: [(&str, &Scenario); 4] = [
        ("cdf", &downlink),
        ("orwp", &walking),
        ("ber", &downlink),
        ("uplink", &uplink),
    ];
    for (kind, s) in runs {
        let sim = Simulator::new(s)?;
        let dirs = [tempdir(), tempdir()];
        for (dir, workers) in dirs.iter().zip([1, 3]) {
            let path = dir.path();
            with_workers(Some(workers), || -> lifisim::Result<()> {
                match kind {
                    "cdf" => cdf_map_to_dir(&sim, path).map(|_| ()),
                    "orwp" => orwp_to_dir(&sim, path).map(|_| ()),
                    "ber" => ber_sweep_to_dir(&sim, path).map(|_| ()),
                    _ => uplink_to_dir(&sim, path).map(|_| ()),
                }
            })??;
        }
        let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
            .expect("output directory is readable")
            .filter_map(|e| e.ok().map(|e| e.file_name()))
            .collect();
        names.sort();
        for name in names {
            let a = std::fs::read(dirs[0].path().join(&name)).ok();
            let b = std::fs::read(dirs[1].path().join(&name)).ok();
            if a.is_none() || a != b {
                differing.push(format!("{kind}/{}", name.to_string_lossy()));
            }
        }
    }
    Ok(differing)
}

fn property_suites() -> lifisim::Result<Outcome> {
    let mut r = rng(80);
    let rot = rotation_suite(&mut r);
    let (misses, non_monotone) = blockage_suite(&mut r);
    let residual = radiosity_residual()?;
    let neumann = neumann_check()?;
    let power = constellation_power()?;
    let ml = ml_suite(&mut r)?;
    let differing = determinism_suite()?;
    let checks = [
        rot <= 1e-12,
        misses == 0 && non_monotone == 0,
        residual <= 1e-10,
        neumann.first_worst < 0.05 && neumann.four_terms_worst < 1e-3,
        power <= 1e-12,
        ml == 0,
        differing.is_empty(),
    ];
    Ok(Outcome::new(
        checks.iter().all(|c| *c),
        format!(
            "rotation max error {rot:.1e}; blockage oracle misses {misses}, non-monotone masks \
             {non_monotone}; radiosity residual {residual:.1e}; single-reflection diffuse \
             deviation worst link {:.2}%, all links {:.2}% (4-term sum {:.1e}); constellation mean-power error {power:.1e}; \
             ML mismatches {ml}; files differing across worker counts {}",
            100.0 * neumann.first_worst,
            100.0 * neumann.first_total,
            neumann.four_terms_worst,
            if differing.is_empty() { "none".to_string() } else { differing.join(",") }
        ),
    ))
}
