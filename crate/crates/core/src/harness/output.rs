use std::io::Write;

use super::{BerRow, CapacityRow, ExperimentConfig, RequiredSnrRow};
use crate::error::Result;

fn write_preamble<W: Write>(out: &mut W, kind: &str, pairs: &[(String, String)]) -> Result<()> {
    writeln!(out, "# experiment = {kind}")?;
    for (k, v) in pairs {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_ber_csv<W: Write>(out: &mut W, cfg: &ExperimentConfig, rows: &[BerRow]) -> Result<()> {
    write_preamble(out, "ber", &cfg.describe())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["snr_db", "frames", "bit_errors", "frame_errors", "ber"])?;
    for r in rows {
        w.write_record([
            r.snr_db.to_string(),
            r.frames.to_string(),
            r.bit_errors.to_string(),
            r.frame_errors.to_string(),
            r.ber.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_capacity_csv<W: Write>(out: &mut W, cfg: &ExperimentConfig, rows: &[CapacityRow]) -> Result<()> {
    let mut pairs = cfg.describe();
    pairs.retain(|(k, _)| !matches!(k.as_str(), "detector" | "iterations" | "damping" | "phi" | "min_bit_errors" | "max_frames"));
    pairs.push(("channels".into(), cfg.channels.to_string()));
    pairs.push(("mc_samples".into(), cfg.mc_samples.to_string()));
    pairs.push(("patterns".into(), format!("{:?}", cfg.bounds.patterns).to_lowercase()));
    pairs.push(("pair_budget".into(), cfg.bounds.pair_budget.to_string()));
    if rows.iter().any(|r| r.bounds.l1_subsampled) {
        pairs.push((
            "note".into(),
            "L1 uses uniformly subsampled pattern pairs; log of a sample mean is biased".into(),
        ));
    }
    write_preamble(out, "capacity", &pairs)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "snr_db", "L1", "L2", "U1", "U2", "L", "U", "L1_se", "L2_se", "U1_se", "U2_se", "C_mc", "C_mc_se",
        "l1_subsampled",
    ])?;
    for r in rows {
        let b = &r.bounds;
        w.write_record([
            b.snr_db.to_string(),
            b.l1.mean.to_string(),
            b.l2.mean.to_string(),
            b.u1.mean.to_string(),
            b.u2.mean.to_string(),
            b.lower().to_string(),
            b.upper().to_string(),
            b.l1.stderr.to_string(),
            b.l2.stderr.to_string(),
            b.u1.stderr.to_string(),
            b.u2.stderr.to_string(),
            opt(r.mc.map(|e| e.mean)),
            opt(r.mc.map(|e| e.stderr)),
            b.l1_subsampled.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_required_snr_csv<W: Write>(
    out: &mut W,
    cfg: &ExperimentConfig,
    rows: &[RequiredSnrRow],
) -> Result<()> {
    let mut pairs = cfg.describe();
    pairs.retain(|(k, _)| !matches!(k.as_str(), "m" | "snr_db" | "eta"));
    pairs.push(("target_ber".into(), cfg.target_ber.to_string()));
    pairs.push(("snr_range".into(), format!("{}:{}", cfg.snr_range.0, cfg.snr_range.1)));
    pairs.push(("resolution_db".into(), cfg.resolution_db.to_string()));
    write_preamble(out, "required-snr", &pairs)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "snr_db", "ber", "status"])?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            opt(r.snr_db),
            opt(r.ber),
            if r.snr_db.is_some() { "ok" } else { "unreachable" }.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::DetectorKind;
    use crate::signal::{Alphabet, GsmConfig};

    #[test]
    fn ber_csv_layout() {
        let system = GsmConfig::new(4, 4, 2, Alphabet::bpsk()).unwrap();
        let cfg = ExperimentConfig::new(system, "0,5".parse().unwrap(), DetectorKind::Mmse);
        let rows = vec![BerRow {
            snr_db: 0.0,
            frames: 10,
            bit_errors: 3,
            frame_errors: 2,
            ber: 0.075,
        }];
        let mut buf = Vec::new();
        write_ber_csv(&mut buf, &cfg, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# experiment = ber");
        assert!(lines.contains(&"# detector = mmse"));
        let header = lines.iter().position(|l| !l.starts_with('#')).unwrap();
        assert_eq!(lines[header], "snr_db,frames,bit_errors,frame_errors,ber");
        assert_eq!(lines[header + 1], "0,10,3,2,0.075");
    }
}
