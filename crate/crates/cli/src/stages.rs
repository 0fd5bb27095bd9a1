//! One function per subcommand. Each reads upstream artifacts from the
//! output directory and writes its own.

use std::fmt::Display;
use std::path::Path;

use tiediv::encounter::{eligible_pairs, read_encounters, write_encounters, FixIndex};
use tiediv::experiments::{
    compare_features, evolution, rank_by_f, subgroup_distributions, sweep_q, sweep_width,
    synth_generate, SweepRow,
};
use tiediv::features::{read_features, write_features};
use tiediv::ingest::{
    parse_gps_log, parse_survey, write_gps_log, write_survey, IngestOptions, Rejection,
};
use tiediv::preprocess::{
    filter_pipeline, read_clean_fixes, read_valid_days, write_clean_fixes, write_valid_days,
};
use tiediv::{detect_encounters, Dataset, RawFix, RegressionResult, SurveyRecord};

use crate::artifacts::{table, write_artifact, Input, Provenance};
use crate::config::RunConfig;
use crate::CliError;

pub const FIXES: &str = "fixes.csv";
pub const SURVEY: &str = "survey.csv";
pub const REJECTIONS: &str = "rejections.csv";
pub const CLEAN_FIXES: &str = "clean_fixes.csv";
pub const VALID_DAYS: &str = "valid_days.csv";
pub const ENCOUNTERS: &str = "encounters.csv";
pub const FEATURES: &str = "features.csv";
pub const COMPARE: &str = "compare.csv";
pub const SWEEP_T: &str = "sweep_t.csv";
pub const SWEEP_Q: &str = "sweep_q.csv";
pub const SUBGROUPS: &str = "subgroups.csv";
pub const EVOLUTION: &str = "evolution.csv";
pub const SYNTH_GPS: &str = "synth_gps.csv";
pub const SYNTH_SURVEY: &str = "synth_survey.csv";
pub const SYNTH_TRUTH: &str = "synth_truth.csv";

/// Canonical artifacts are always comma separated.
fn canonical_fixes(input: &Input, cfg: &RunConfig) -> Result<Vec<RawFix>, CliError> {
    let opts = IngestOptions {
        delimiter: b',',
        local_offset: cfg.preprocess.utc_offset,
        comment: Some(b'#'),
    };
    let parsed = parse_gps_log(&input.bytes[..], &opts)?;
    expect_clean(&input.name, &parsed.rejections)?;
    Ok(parsed.records)
}

fn canonical_survey(input: &Input) -> Result<Vec<SurveyRecord>, CliError> {
    let parsed = parse_survey(&input.bytes[..], b',', Some(b'#'))?;
    expect_clean(&input.name, &parsed.rejections)?;
    Ok(parsed.records)
}

fn expect_clean(name: &str, rejections: &[Rejection]) -> Result<(), CliError> {
    match rejections.first() {
        None => Ok(()),
        Some(r) => Err(CliError::Artifact(format!(
            "{name} is corrupt ({} bad rows, first: {r})",
            rejections.len()
        ))),
    }
}

fn required<'a>(path: &'a Option<std::path::PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("--{flag} is required for this command")))
}

fn flush<W: std::io::Write>(mut w: csv::Writer<W>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Artifact(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Core(e.into())
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let gps = Input::read(required(&cfg.gps, "gps")?)?;
    let survey = Input::read(required(&cfg.survey, "survey")?)?;
    let opts = IngestOptions {
        delimiter: cfg.delimiter,
        local_offset: cfg.preprocess.utc_offset,
        comment: Some(b'#'),
    };
    let fixes = parse_gps_log(&gps.bytes[..], &opts)?;
    let answers = parse_survey(&survey.bytes[..], cfg.delimiter, Some(b'#'))?;
    let dir = &cfg.out_dir;

    let mut meta = Provenance::new("ingest", cfg, &[&gps, &survey]);
    meta.note("gps-rows", fixes.rows());
    meta.note("gps-rejected", fixes.rejections.len());
    write_artifact(dir, FIXES, &meta, |buf| {
        Ok(write_gps_log(buf, &fixes.records)?)
    })?;

    let mut meta = Provenance::new("ingest", cfg, &[&gps, &survey]);
    meta.note("survey-rows", answers.rows());
    meta.note("survey-rejected", answers.rejections.len());
    write_artifact(dir, SURVEY, &meta, |buf| {
        Ok(write_survey(buf, &answers.records)?)
    })?;

    let meta = Provenance::new("ingest", cfg, &[&gps, &survey]);
    write_artifact(dir, REJECTIONS, &meta, |buf| {
        let mut w = table(buf);
        w.write_record(["source", "line", "reason"])
            .map_err(csv_err)?;
        for (source, list) in [
            (&gps.name, &fixes.rejections),
            (&survey.name, &answers.rejections),
        ] {
            for r in list {
                w.write_record([source.as_str(), &r.line.to_string(), &r.reason])
                    .map_err(csv_err)?;
            }
        }
        flush(w)
    })?;
    println!(
        "ingest: {} fixes ({} rejected), {} survey answers ({} rejected)",
        fixes.records.len(),
        fixes.rejections.len(),
        answers.records.len(),
        answers.rejections.len()
    );
    Ok(())
}

pub fn preprocess(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = &cfg.out_dir;
    let fixes_in = Input::upstream(dir, FIXES, "ingest")?;
    let survey_in = Input::upstream(dir, SURVEY, "ingest")?;
    let fixes = canonical_fixes(&fixes_in, cfg)?;
    let survey = canonical_survey(&survey_in)?;
    let out = filter_pipeline(&fixes, &survey, &cfg.preprocess)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }

    let mut meta = Provenance::new("preprocess", cfg, &[&fixes_in, &survey_in]);
    let r = &out.report;
    meta.note("dedupe-key", tiediv::preprocess::DEDUPE_KEY);
    meta.note("min-slots-per-day", cfg.preprocess.min_slots_per_day());
    meta.note("input-fixes", r.input_fixes);
    meta.note("outside-window", r.outside_window);
    meta.note("inaccurate", r.inaccurate);
    meta.note("duplicates", r.duplicates);
    meta.note("sparse-user-days", r.sparse_user_days);
    meta.note("users-with-few-days", r.users_with_few_days);
    meta.note("users-without-survey", r.users_without_survey);
    meta.note("output-fixes", r.output_fixes);
    meta.note("retained-users", r.retained_users);
    for w in &out.warnings {
        meta.note("warning", w);
    }
    write_artifact(dir, CLEAN_FIXES, &meta, |buf| {
        Ok(write_clean_fixes(buf, &out.fixes)?)
    })?;
    write_artifact(dir, VALID_DAYS, &meta, |buf| {
        Ok(write_valid_days(buf, &out.valid_days)?)
    })?;
    println!(
        "preprocess: {} fixes kept for {} users",
        r.output_fixes, r.retained_users
    );
    Ok(())
}

pub fn encounters(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = &cfg.out_dir;
    let clean_in = Input::upstream(dir, CLEAN_FIXES, "preprocess")?;
    let days_in = Input::upstream(dir, VALID_DAYS, "preprocess")?;
    let survey_in = Input::upstream(dir, SURVEY, "ingest")?;
    let clean = read_clean_fixes(&clean_in.bytes[..])?;
    let valid_days = read_valid_days(&days_in.bytes[..])?;
    let survey = canonical_survey(&survey_in)?;

    let pairs = eligible_pairs(&survey, &valid_days, cfg.preprocess.min_common_days);
    let found = detect_encounters(&FixIndex::new(&clean), &valid_days, &pairs, cfg.threshold_m)?;
    let total: usize = found.values().map(|s| s.len()).sum();

    let mut meta = Provenance::new("encounters", cfg, &[&clean_in, &days_in, &survey_in]);
    meta.note("eligible-pairs", pairs.len());
    meta.note("encounters", total);
    write_artifact(dir, ENCOUNTERS, &meta, |buf| {
        Ok(write_encounters(buf, found.values())?)
    })?;
    println!("encounters: {total} across {} eligible pairs", pairs.len());
    Ok(())
}

/// Survey, valid days and encounters joined into observations.
fn load_dataset(cfg: &RunConfig) -> Result<(Dataset, [Input; 3]), CliError> {
    let dir = &cfg.out_dir;
    let enc_in = Input::upstream(dir, ENCOUNTERS, "encounters")?;
    let days_in = Input::upstream(dir, VALID_DAYS, "preprocess")?;
    let survey_in = Input::upstream(dir, SURVEY, "ingest")?;
    let found = read_encounters(&enc_in.bytes[..])?;
    let valid_days = read_valid_days(&days_in.bytes[..])?;
    let survey = canonical_survey(&survey_in)?;
    let ds = Dataset::assemble(&survey, &valid_days, &found, cfg.preprocess.min_common_days)?;
    Ok((ds, [enc_in, days_in, survey_in]))
}

pub fn features(cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, inputs) = load_dataset(cfg)?;
    let rows = ds.feature_rows(cfg.features())?;
    let mut meta = Provenance::new("features", cfg, &inputs.iter().collect::<Vec<_>>());
    meta.note("observations", rows.len());
    meta.note("pairs", ds.pairs.len());
    write_artifact(&cfg.out_dir, FEATURES, &meta, |buf| {
        Ok(write_features(buf, &rows)?)
    })?;
    println!(
        "features: {} observations over {} pairs",
        rows.len(),
        ds.pairs.len()
    );
    Ok(())
}

fn stat_fields(outcome: &tiediv::Result<RegressionResult>) -> [String; 5] {
    match outcome {
        Ok(r) => [
            r.n.to_string(),
            r.r.to_string(),
            r.f_value.to_string(),
            r.p_value.to_string(),
            "ok".into(),
        ],
        Err(e) => [
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            e.to_string(),
        ],
    }
}

pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let feat_in = Input::upstream(&cfg.out_dir, FEATURES, "features")?;
    let rows = read_features(&feat_in.bytes[..])?;
    let results = compare_features(&rows);
    let ranking = rank_by_f(&results);
    let meta = Provenance::new("compare", cfg, &[&feat_in]);
    write_artifact(&cfg.out_dir, COMPARE, &meta, |buf| {
        let mut w = table(buf);
        w.write_record(["rank", "feature", "n", "r", "f_value", "p_value", "status"])
            .map_err(csv_err)?;
        for (i, (feature, _)) in ranking.iter().enumerate() {
            let c = results
                .iter()
                .find(|c| c.feature == *feature)
                .expect("ranked features come from results");
            let [n, r, f, p, status] = stat_fields(&c.outcome);
            w.write_record([
                &(i + 1).to_string(),
                feature.name(),
                &n,
                &r,
                &f,
                &p,
                &status,
            ])
            .map_err(csv_err)?;
        }
        for c in results.iter().filter(|c| c.outcome.is_err()) {
            let [n, r, f, p, status] = stat_fields(&c.outcome);
            w.write_record(["", c.feature.name(), &n, &r, &f, &p, &status])
                .map_err(csv_err)?;
        }
        flush(w)
    })?;
    for (i, (feature, f)) in ranking.iter().enumerate() {
        println!("{}. {feature}: F = {f:.3}", i + 1);
    }
    Ok(())
}

fn write_sweep(
    cfg: &RunConfig,
    name: &str,
    column: &str,
    meta: &Provenance,
    rows: &[SweepRow],
) -> Result<(), CliError> {
    write_artifact(&cfg.out_dir, name, meta, |buf| {
        let mut w = table(buf);
        w.write_record([column, "n", "r", "f_value", "p_value", "status"])
            .map_err(csv_err)?;
        for row in rows {
            let [n, r, f, p, status] = stat_fields(&row.outcome);
            w.write_record([&row.parameter.to_string(), &n, &r, &f, &p, &status])
                .map_err(csv_err)?;
        }
        flush(w)
    })?;
    Ok(())
}

fn report_sweep(label: &str, rows: &[SweepRow]) {
    for row in rows {
        match &row.outcome {
            Ok(r) => println!(
                "{label} = {}: F = {:.3}, p = {:.3e}",
                row.parameter, r.f_value, r.p_value
            ),
            Err(e) => println!("{label} = {}: {e}", row.parameter),
        }
    }
}

pub fn sweep_t(cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, inputs) = load_dataset(cfg)?;
    let rows = sweep_width(&ds, &cfg.widths)?;
    let mut meta = Provenance::new("sweep-t", cfg, &inputs.iter().collect::<Vec<_>>());
    meta.note("diversity", "shannon");
    if cfg.widths.contains(&720) {
        meta.note(
            "width-normalization",
            "a 710 min grid point is run as 720 so that t divides 1440",
        );
    }
    write_sweep(cfg, SWEEP_T, "width_min", &meta, &rows)?;
    report_sweep("t", &rows);
    Ok(())
}

pub fn sweep_q_stage(cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, inputs) = load_dataset(cfg)?;
    let rows = sweep_q(&ds, &cfg.orders, cfg.width_t)?;
    let meta = Provenance::new("sweep-q", cfg, &inputs.iter().collect::<Vec<_>>());
    write_sweep(cfg, SWEEP_Q, "q", &meta, &rows)?;
    report_sweep("q", &rows);
    Ok(())
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn subgroups(cfg: &RunConfig) -> Result<(), CliError> {
    let feat_in = Input::upstream(&cfg.out_dir, FEATURES, "features")?;
    let rows = read_features(&feat_in.bytes[..])?;
    let summaries = subgroup_distributions(&rows);
    let meta = Provenance::new("subgroups", cfg, &[&feat_in]);
    write_artifact(&cfg.out_dir, SUBGROUPS, &meta, |buf| {
        let mut w = table(buf);
        w.write_record([
            "closeness",
            "label",
            "feature",
            "count",
            "min",
            "q1",
            "median",
            "q3",
            "max",
            "mean",
            "outliers",
        ])
        .map_err(csv_err)?;
        for s in &summaries {
            let b = s.stats.as_ref();
            let outliers = b.map(|b| {
                b.outliers
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            });
            w.write_record([
                s.closeness.value().to_string(),
                s.closeness.description().to_string(),
                s.feature.name().to_string(),
                s.count.to_string(),
                opt(b.map(|b| b.min)),
                opt(b.map(|b| b.q1)),
                opt(b.map(|b| b.median)),
                opt(b.map(|b| b.q3)),
                opt(b.map(|b| b.max)),
                opt(b.map(|b| b.mean)),
                outliers.unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        flush(w)
    })?;
    println!("subgroups: {} summaries", summaries.len());
    Ok(())
}

pub fn evolve(cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, inputs) = load_dataset(cfg)?;
    let rows = evolution(&ds, &cfg.horizons, cfg.features())?;
    let meta = Provenance::new("evolve", cfg, &inputs.iter().collect::<Vec<_>>());
    write_artifact(&cfg.out_dir, EVOLUTION, &meta, |buf| {
        let mut w = table(buf);
        w.write_record([
            "closeness",
            "label",
            "horizon_days",
            "n_pairs",
            "mean_temporal_diversity",
        ])
        .map_err(csv_err)?;
        for r in &rows {
            w.write_record([
                r.closeness.value().to_string(),
                r.closeness.description().to_string(),
                r.horizon_days.to_string(),
                r.n_pairs.to_string(),
                opt(r.mean_temporal_diversity),
            ])
            .map_err(csv_err)?;
        }
        flush(w)
    })?;
    println!("evolve: {} rows", rows.len());
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let data = synth_generate(&cfg.synth)?;
    let dir = &cfg.out_dir;
    let mut meta = Provenance::new("synth", cfg, &[]);
    meta.note("fixes", data.fixes.len());
    meta.note("pairs", data.truth.len());
    write_artifact(dir, SYNTH_GPS, &meta, |buf| {
        Ok(write_gps_log(buf, &data.fixes)?)
    })?;
    write_artifact(dir, SYNTH_SURVEY, &meta, |buf| {
        Ok(write_survey(buf, &data.survey)?)
    })?;
    write_artifact(dir, SYNTH_TRUTH, &meta, |buf| {
        let mut w = table(buf);
        w.write_record(["user_lo", "user_hi", "archetype", "planned_encounters"])
            .map_err(csv_err)?;
        for (pair, archetype) in &data.truth {
            let planned = data.planned.get(pair).map_or(0, Vec::len);
            w.write_record([
                pair.lo().as_str(),
                pair.hi().as_str(),
                &format!("{archetype:?}").to_lowercase(),
                &planned.to_string(),
            ])
            .map_err(csv_err)?;
        }
        flush(w)
    })?;
    println!(
        "synth: {} fixes for {} pairs written to {}",
        data.fixes.len(),
        data.truth.len(),
        dir.display()
    );
    Ok(())
}

pub fn all(cfg: &RunConfig) -> Result<(), CliError> {
    required(&cfg.gps, "gps")?;
    required(&cfg.survey, "survey")?;
    ingest(cfg)?;
    preprocess(cfg)?;
    encounters(cfg)?;
    features(cfg)?;
    compare(cfg)?;
    sweep_t(cfg)?;
    sweep_q_stage(cfg)?;
    subgroups(cfg)?;
    evolve(cfg)
}
