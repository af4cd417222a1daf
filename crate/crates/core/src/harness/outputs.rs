//! Runs that write their datasets and plots into an output directory.

use std::path::{Path, PathBuf};

use super::emit::{ensure_dir, read_csv, write_csv, write_text, CsvSink, Header};
use super::svg::{Plot, Series};
use super::{
    run_ber_sweep, run_cdf_map, run_orwp_eval, run_uplink_eval, BerRecord, DownlinkRecord,
    DownlinkResult, UplinkRecord, UplinkResult,
};
use crate::scenario::Simulator;
use crate::Result;

/// Files written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

fn save_scenario(sim: &Simulator, dir: &Path) -> Result<PathBuf> {
    let s = sim.scenario();
    let text = format!(
        "# scenario_hash={} seed={} kind=scenario\n{}",
        s.hash(),
        s.seed,
        s.to_toml()
    );
    write_text(dir.join("scenario.toml"), &text)
}

fn cdf_plot(title: &str, res: &DownlinkResult) -> Plot {
    let mut plot = Plot::new(title, "required received SNR [dB]", "CDF", false);
    plot.steps = true;
    for scheme in &res.schemes {
        let points = res
            .curve
            .iter()
            .filter(|p| &p.scheme == scheme)
            .map(|p| (p.rx_db, p.cdf))
            .collect();
        plot.series.push(Series {
            label: scheme.clone(),
            points,
            markers: false,
        });
    }
    plot
}

fn downlink_to_dir(
    sim: &Simulator,
    dir: &Path,
    prefix: &str,
    run: fn(&Simulator, &mut dyn FnMut(&DownlinkRecord) -> Result<()>) -> Result<DownlinkResult>,
) -> Result<(DownlinkResult, Written)> {
    ensure_dir(dir)?;
    let s = sim.scenario();
    let mut files = vec![save_scenario(sim, dir)?];
    let kind = format!("{prefix}_records");
    let mut sink = CsvSink::create(dir.join(format!("{kind}.csv")), &Header::new(s, &kind))?;
    let res = run(sim, &mut |r| sink.push(r))?;
    files.push(sink.finish()?);
    let kind = format!("{prefix}_summary");
    files.push(write_csv(dir.join(format!("{kind}.csv")), &Header::new(s, &kind), &res.summary)?);
    let kind = format!("{prefix}_curve");
    files.push(write_csv(dir.join(format!("{kind}.csv")), &Header::new(s, &kind), &res.curve)?);
    let title = format!("{} {} required SNR", s.device.label(), s.activity.name());
    files.push(write_text(dir.join(format!("{prefix}.svg")), &cdf_plot(&title, &res).render())?);
    Ok((res, Written { files }))
}

/// Static-user CDF map: `cdf_records.csv`, `cdf_summary.csv`, `cdf_curve.csv`, `cdf.svg`.
pub fn cdf_map_to_dir(sim: &Simulator, dir: impl AsRef<Path>) -> Result<(DownlinkResult, Written)> {
    downlink_to_dir(sim, dir.as_ref(), "cdf", run_cdf_map)
}

/// Walking-user run: `orwp_records.csv`, `orwp_summary.csv`, `orwp_curve.csv`, `orwp.svg`.
pub fn orwp_to_dir(sim: &Simulator, dir: impl AsRef<Path>) -> Result<(DownlinkResult, Written)> {
    downlink_to_dir(sim, dir.as_ref(), "orwp", run_orwp_eval)
}

/// BER sweep: `ber_sweep.csv` and `ber_sweep.svg` (bound as lines, Monte Carlo as markers).
pub fn ber_sweep_to_dir(sim: &Simulator, dir: impl AsRef<Path>) -> Result<(Vec<BerRecord>, Written)> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let s = sim.scenario();
    let records = run_ber_sweep(sim)?;
    let mut files = vec![save_scenario(sim, dir)?];
    files.push(write_csv(dir.join("ber_sweep.csv"), &Header::new(s, "ber_sweep"), &records)?);
    let mut plot = Plot::new(
        &format!("{} BER, {} APs", s.device.label(), s.ber_sweep.n_a),
        "received SNR [dB]",
        "BER",
        true,
    );
    for v in &s.ber_sweep.variants {
        let rows: Vec<&BerRecord> = records.iter().filter(|r| r.variant == v.label).collect();
        plot.series.push(Series {
            label: format!("{} bound", v.label),
            points: rows.iter().map(|r| (r.snr_rx_db, r.ber_bound)).collect(),
            markers: false,
        });
        if rows.iter().any(|r| r.bits > 0) {
            plot.series.push(Series {
                label: format!("{} MC", v.label),
                points: rows.iter().map(|r| (r.snr_rx_db, r.ber_mc)).collect(),
                markers: true,
            });
        }
    }
    files.push(write_text(dir.join("ber_sweep.svg"), &plot.render())?);
    Ok((records, Written { files }))
}

/// Uplink sweep: `uplink_records.csv`, `uplink_ee.csv`, `uplink_ber.svg`, `uplink_ee.svg`.
pub fn uplink_to_dir(sim: &Simulator, dir: impl AsRef<Path>) -> Result<(UplinkResult, Written)> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let s = sim.scenario();
    let mut files = vec![save_scenario(sim, dir)?];
    let mut sink: CsvSink<UplinkRecord> =
        CsvSink::create(dir.join("uplink_records.csv"), &Header::new(s, "uplink_records"))?;
    let res = run_uplink_eval(sim, &mut |r| sink.push(r))?;
    files.push(sink.finish()?);
    files.push(write_csv(dir.join("uplink_ee.csv"), &Header::new(s, "uplink_ee"), &res.summary)?);

    let schemes: Vec<String> = {
        let mut v: Vec<String> = Vec::new();
        for r in &res.summary {
            if !v.contains(&r.scheme) {
                v.push(r.scheme.clone());
            }
        }
        v
    };
    let mut ber = Plot::new(&format!("{} uplink BER", res.config), "mean received SNR [dB]", "mean BER", true);
    let mut ee = Plot::new(
        &format!("{} energy efficiency", res.config),
        "received spectral efficiency [bit/channel use]",
        "energy efficiency [bit/J]",
        true,
    );
    for scheme in &schemes {
        let rows = res.curve(scheme);
        ber.series.push(Series {
            label: scheme.clone(),
            points: rows.iter().map(|r| (r.mean_rx_db, r.mean_ber)).collect(),
            markers: false,
        });
        ee.series.push(Series {
            label: scheme.clone(),
            points: rows.iter().map(|r| (r.eta_rse, r.eta_ee)).collect(),
            markers: false,
        });
    }
    files.push(write_text(dir.join("uplink_ber.svg"), &ber.render())?);
    files.push(write_text(dir.join("uplink_ee.svg"), &ee.render())?);
    Ok((res, Written { files }))
}

/// Read back a records file written by [`cdf_map_to_dir`] or [`orwp_to_dir`].
pub fn read_downlink_records(path: impl AsRef<Path>) -> Result<(Header, Vec<DownlinkRecord>)> {
    read_csv(path)
}
