use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write as _};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Args, ValueEnum};
use dca::analysis::{
    aggregate, classify, group_counts, group_table, group_tsv, mean_std, verdict_table, verdict_tsv, MagMode,
    RunSummary,
};
use dca::datasets::{
    context_profile, first_crossing, load_csv, load_uci, rolling_mean, run_bc_experiment, BcConfig, BcOutcome,
    DataOrder, LabelledItem,
};
use dca::portscan::{mag_matrix, run_portscan_experiment, PortscanConfig, PortscanOutcome, EXPERIMENTS};
use dca::streams::{
    generate_scenario, read_log, replay, serve_session, write_log, Client, Event, Payload, ReplayRate, ServeOptions,
    TissueEngine,
};
use dca::tissue::{read_migration_log, write_migration_log};
use dca::{AntigenLabel, MigrationRecord, PopulationConfig};

use crate::output::{slug, OutDir};
use crate::settings::{parse_mag_mode, parse_sweep, Kind, Settings};
use crate::{Cli, Command};

/// Window of the rolling mean used to locate the class boundary.
const CROSSING_WINDOW: usize = 21;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DataFormat {
    /// Original comma-separated file: id, 9 attributes on 1-10, class 2/4, `?` for missing.
    Uci,
    /// `id,a1..a9,class` with attributes on [0,1] and class 0/1.
    Csv,
}

#[derive(Debug, Args)]
pub struct BcArgs {
    #[arg(long, default_value = "data/breast-cancer-wisconsin.data")]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "uci")]
    pub format: DataFormat,
    /// one-step, two-step, random or all; repeatable.
    #[arg(long = "order")]
    pub orders: Vec<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Classification threshold on the mature fraction.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Migration thresholds to sweep, e.g. `1,5,10,15,var`. Defaults to the one-step order.
    #[arg(long)]
    pub sweep_migration: Option<String>,
    /// Cells sampling each antigen per tick.
    #[arg(long)]
    pub multiplicity: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PortscanArgs {
    /// 1-4 or all; repeatable.
    #[arg(long = "experiment")]
    pub experiments: Vec<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// per-run or pooled.
    #[arg(long)]
    pub mag_mode: Option<String>,
    /// Replaces the safe->mature weight of every selected experiment.
    #[arg(long, allow_hyphen_values = true)]
    pub safe_to_mat: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Event log path; defaults to `<out>/events.log`.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Raise the inflammation signal for the whole session.
    #[arg(long)]
    pub user_absent: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub log: PathBuf,
    /// `max`, or a wall-clock speed-up factor.
    #[arg(long, default_value = "max")]
    pub rate: String,
    /// Send to a running server instead of a local tissue.
    #[arg(long)]
    pub connect: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub listen: String,
    /// Connections per session.
    #[arg(long, default_value_t = 1)]
    pub clients: usize,
    /// Sessions to serve before exiting; 0 serves until interrupted.
    #[arg(long, default_value_t = 0)]
    pub sessions: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Event log whose antigen events name the process of each label.
    #[arg(long)]
    pub process_groups: Option<PathBuf>,
}

pub fn run(cli: &Cli) -> Result<()> {
    let kind = match cli.command {
        Command::Bc(_) => Kind::BreastCancer,
        _ => Kind::Portscan,
    };
    let mut settings = Settings::load(kind, cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        settings.seed = seed;
    }
    match &cli.command {
        Command::Bc(a) => bc(a, settings, &cli.out),
        Command::Portscan(a) => portscan(a, settings, &cli.out),
        Command::Generate(a) => generate(a, settings, &cli.out),
        Command::Replay(a) => replay_log(a, settings, &cli.out),
        Command::Serve(a) => serve(a, settings, &cli.out),
        Command::Report(a) => report(a, settings, &cli.out),
    }
}

fn bc(args: &BcArgs, mut settings: Settings, out: &Path) -> Result<()> {
    if let Some(r) = args.repeats {
        settings.repeats = r;
    }
    if let Some(t) = args.threshold {
        settings.classification_threshold = t;
    }
    if let Some(m) = args.multiplicity {
        settings.population.sample_multiplicity = m;
    }
    settings.population.validate()?;
    let sweep = args.sweep_migration.as_deref().map(parse_sweep).transpose()?;
    let orders = parse_orders(&args.orders, sweep.is_some())?;
    let thresholds = sweep.unwrap_or_else(|| vec![settings.population.threshold]);

    let file = File::open(&args.dataset).with_context(|| format!("opening {}", args.dataset.display()))?;
    let items: Vec<LabelledItem> = match args.format {
        DataFormat::Uci => load_uci(BufReader::new(file), settings.class0)?,
        DataFormat::Csv => load_csv(BufReader::new(file))?,
    };
    let dir = OutDir::create(out)?;
    let mut summary = String::from(
        "run\torder\tmigration_threshold\tmultiplicity\trepeats\tmean_errors\tstd_errors\tpooled_errors\tunseen\tscale\tcrossing\n",
    );
    let mut text = String::new();
    for threshold in &thresholds {
        for &order in &orders {
            let cfg = BcConfig {
                population: PopulationConfig {
                    threshold: *threshold,
                    ..settings.population.clone()
                },
                repeats: settings.repeats,
                threshold: settings.classification_threshold,
                calibration_target: settings.calibration_target,
                orientation: settings.orientation,
                seed: settings.seed,
            };
            let outcome = run_bc_experiment(&items, order, &cfg)?;
            let name = if args.sweep_migration.is_some() {
                format!("bc-{order}-thr-{}", slug(&threshold.to_string()))
            } else {
                format!("bc-{order}")
            };
            write_bc_run(&dir, &name, &outcome)?;
            let (mean, std) = outcome.per_run_error_stats();
            let crossing = first_crossing(&rolling_mean(
                &context_profile(&outcome.summary.verdicts, &outcome.first_order),
                CROSSING_WINDOW,
            ));
            let unseen = outcome.summary.errors.map_or(0, |e| e.unseen);
            let _ = writeln!(
                summary,
                "{name}\t{order}\t{threshold}\t{}\t{}\t{mean}\t{std}\t{}\t{unseen}\t{}\t{}",
                cfg.population.sample_multiplicity,
                cfg.repeats,
                outcome.errors(),
                outcome.mapping.scale,
                crossing.map_or("-".into(), |c| c.to_string()),
            );
            let _ = writeln!(
                text,
                "{name:<28} errors per run {mean:>7.1} ± {std:<6.1} pooled {:>4}  crossing {}",
                outcome.errors(),
                crossing.map_or("-".into(), |c| c.to_string()),
            );
        }
    }
    dir.write("summary.tsv", &summary)?;
    dir.write("summary.txt", &text)?;
    dir.manifest(&settings)?;
    print!("{text}");
    Ok(())
}

fn parse_orders(raw: &[String], sweep: bool) -> Result<Vec<DataOrder>> {
    let all = [DataOrder::OneStep, DataOrder::TwoStep, DataOrder::Random];
    if raw.is_empty() {
        return Ok(if sweep { vec![DataOrder::OneStep] } else { all.to_vec() });
    }
    let mut orders = Vec::new();
    for r in raw {
        if r == "all" {
            orders.extend(all);
        } else {
            orders.push(r.parse()?);
        }
    }
    orders.dedup();
    Ok(orders)
}

fn write_bc_run(dir: &OutDir, name: &str, outcome: &BcOutcome) -> Result<()> {
    dir.write(format!("{name}/verdicts.tsv"), verdict_tsv(&outcome.summary.verdicts))?;
    dir.write(format!("{name}/verdicts.txt"), verdict_table(&outcome.summary.verdicts))?;
    let mut errors = String::from("repeat\tmisclassified\tunseen\ttotal\n");
    for (r, e) in outcome.per_run_errors.iter().enumerate() {
        let _ = writeln!(errors, "{r}\t{}\t{}\t{}", e.misclassified, e.unseen, e.total());
    }
    dir.write(format!("{name}/errors.tsv"), errors)?;
    write_migrations(dir, name, &outcome.records)
}

fn write_migrations(dir: &OutDir, name: &str, runs: &[Vec<MigrationRecord>]) -> Result<()> {
    for (r, records) in runs.iter().enumerate() {
        let mut buf = Vec::new();
        write_migration_log(&mut buf, records)?;
        dir.write(format!("{name}/migrations/rep-{r:02}.log"), buf)?;
    }
    Ok(())
}

fn portscan(args: &PortscanArgs, mut settings: Settings, out: &Path) -> Result<()> {
    if let Some(r) = args.repeats {
        settings.repeats = r;
    }
    if let Some(m) = &args.mag_mode {
        settings.mag_mode = parse_mag_mode(m)?;
    }
    if let Some(w) = args.safe_to_mat {
        if !w.is_finite() {
            bail!("--safe-to-mat must be finite");
        }
    }
    let mut selected = Vec::new();
    if args.experiments.is_empty() || args.experiments.iter().any(|e| e == "all") {
        selected.extend(EXPERIMENTS);
    }
    for e in args.experiments.iter().filter(|e| *e != "all") {
        let id: u8 = e
            .parse()
            .with_context(|| format!("experiment must be 1-4 or all, got {e:?}"))?;
        selected.push(dca::portscan::experiment(id)?);
    }
    selected.sort_by_key(|e| e.id);
    selected.dedup_by_key(|e| e.id);
    if let Some(w) = args.safe_to_mat {
        for e in &mut selected {
            e.safe_to_mat = w;
        }
    }
    let cfg = PortscanConfig {
        scenario: settings.scenario.clone(),
        population: settings.population.clone(),
        repeats: settings.repeats,
        mode: settings.mag_mode,
        seed: settings.seed,
    };
    let dir = OutDir::create(out)?;
    let mut outcomes: Vec<PortscanOutcome> = Vec::new();
    let mut summary = String::from("experiment\tsafe_to_mat\tmean_difference\tt\tp\tantigen_per_dc\n");
    let mut text = String::new();
    for exp in &selected {
        let o = run_portscan_experiment(exp, &cfg)?;
        let name = format!("exp{}", exp.id);
        let rows = o.summary.group_rows(settings.mag_mode);
        dir.write(format!("{name}/processes.tsv"), group_tsv(&rows))?;
        dir.write(format!("{name}/processes.txt"), group_table(&rows))?;
        dir.write(format!("{name}/verdicts.tsv"), verdict_tsv(&o.summary.verdicts))?;
        write_migrations(&dir, &name, &o.records)?;
        let (diff, t, p) = match &o.separation {
            Some(s) => (
                s.mean_difference.to_string(),
                s.statistic.map_or("-".into(), |v| v.to_string()),
                s.p_value.map_or("-".into(), |v| v.to_string()),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        let _ = writeln!(
            summary,
            "{}\t{}\t{diff}\t{t}\t{p}\t{}",
            exp.id,
            exp.safe_to_mat,
            o.mean_antigen_per_dc()
        );
        let _ = writeln!(
            text,
            "{exp}\n{}scanner - file-transfer: {diff} (t {t}, p {p})\n",
            group_table(&rows)
        );
        outcomes.push(o);
    }
    let matrix = mag_matrix(&outcomes, settings.mag_mode);
    let mut mtsv = String::from("process");
    for id in matrix.keys() {
        let _ = write!(mtsv, "\texp{id}");
    }
    mtsv.push('\n');
    let names: Vec<String> = matrix
        .values()
        .flat_map(|row| row.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    for n in names {
        mtsv.push_str(&n);
        for row in matrix.values() {
            let v = row.get(&n).copied().flatten();
            let _ = write!(mtsv, "\t{}", v.map_or("-".into(), |x| x.to_string()));
        }
        mtsv.push('\n');
    }
    dir.write("mag.tsv", mtsv)?;
    dir.write("summary.tsv", summary)?;
    dir.write("summary.txt", &text)?;
    dir.manifest(&settings)?;
    print!("{text}");
    Ok(())
}

fn generate(args: &GenerateArgs, mut settings: Settings, out: &Path) -> Result<()> {
    if args.user_absent {
        settings.scenario.inflammation = dca::streams::InflammationMode::UserAbsent;
    }
    settings.scenario.seed = settings.seed;
    let events = generate_scenario(&settings.scenario)?;
    let dir = OutDir::create(out)?;
    let path = args.file.clone().unwrap_or_else(|| dir.path("events.log"));
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    write_log(&mut w, &events)?;
    w.flush()?;
    dir.manifest(&settings)?;
    println!("{} events written to {}", events.len(), path.display());
    Ok(())
}

fn load_events(path: &Path) -> Result<Vec<Event>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_log(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

/// Label groups named by the antigen events themselves.
fn groups_from_events(events: &[Event]) -> Vec<(String, Vec<AntigenLabel>)> {
    let mut groups: BTreeMap<String, Vec<AntigenLabel>> = BTreeMap::new();
    for e in events {
        if let Payload::Antigen { label, process } = &e.payload {
            let g = groups.entry(process.clone()).or_default();
            if !g.contains(label) {
                g.push(label.clone());
            }
        }
    }
    groups.into_iter().collect()
}

fn population(settings: &Settings) -> PopulationConfig {
    PopulationConfig {
        seed: settings.seed,
        ..settings.population.clone()
    }
}

fn replay_log(args: &ReplayArgs, settings: Settings, out: &Path) -> Result<()> {
    let rate: ReplayRate = args.rate.parse()?;
    let events = load_events(&args.log)?;
    if let Some(addr) = &args.connect {
        let mut client = Client::connect(addr.as_str()).with_context(|| format!("connecting to {addr}"))?;
        let stats = replay(&events, rate, &mut client)?;
        client.finish()?;
        println!("{} events sent to {addr} in {:.2?}", stats.delivered, stats.elapsed);
        return Ok(());
    }
    let mut engine = TissueEngine::new(population(&settings))?;
    let stats = replay(&events, rate, &mut engine)?;
    engine.finish()?;
    let records = engine.drain_records();
    let dir = OutDir::create(out)?;
    let text = write_session(&dir, Path::new(""), &records, &groups_from_events(&events), &settings)?;
    dir.manifest(&settings)?;
    println!(
        "{} events replayed, {} migrations in {:.2?}",
        stats.delivered,
        records.len(),
        stats.elapsed
    );
    print!("{text}");
    Ok(())
}

/// Migration log, verdicts and process table of one session.
fn write_session(
    dir: &OutDir,
    sub: &Path,
    records: &[MigrationRecord],
    groups: &[(String, Vec<AntigenLabel>)],
    settings: &Settings,
) -> Result<String> {
    let mut buf = Vec::new();
    write_migration_log(&mut buf, records)?;
    dir.write(sub.join("migrations.log"), buf)?;
    report_tables(dir, sub, records, groups, settings)
}

fn report_tables(
    dir: &OutDir,
    sub: &Path,
    records: &[MigrationRecord],
    groups: &[(String, Vec<AntigenLabel>)],
    settings: &Settings,
) -> Result<String> {
    let mut verdicts = aggregate(records);
    classify(&mut verdicts, settings.classification_threshold)?;
    dir.write(sub.join("verdicts.tsv"), verdict_tsv(&verdicts))?;
    let mut text = verdict_table(&verdicts);
    if !groups.is_empty() {
        let summary = RunSummary {
            per_run_groups: vec![group_counts(&verdicts, groups)],
            verdicts,
            errors: None,
        };
        let rows = summary.group_rows(MagMode::Pooled);
        dir.write(sub.join("processes.tsv"), group_tsv(&rows))?;
        text = group_table(&rows);
        dir.write(sub.join("processes.txt"), &text)?;
    }
    Ok(text)
}

fn serve(args: &ServeArgs, settings: Settings, out: &Path) -> Result<()> {
    let listener = TcpListener::bind(&args.listen).with_context(|| format!("binding {}", args.listen))?;
    let dir = OutDir::create(out)?;
    dir.manifest(&settings)?;
    println!("listening on {}", listener.local_addr()?);
    io::stdout().flush()?;
    let opts = ServeOptions {
        clients: args.clients,
        ..Default::default()
    };
    let mut session = 0usize;
    while args.sessions == 0 || session < args.sessions {
        let sub = PathBuf::from(format!("session-{session:03}"));
        fs::create_dir_all(dir.path(&sub))?;
        let log_path = dir.path(sub.join("migrations.log"));
        let mut log =
            BufWriter::new(File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);
        let mut write_err: Option<io::Error> = None;
        let engine = TissueEngine::new(population(&settings))?;
        let report = serve_session(&listener, engine, &opts, |r| {
            if write_err.is_none() {
                if let Err(e) = writeln!(log, "{}", r.to_line()).and_then(|_| log.flush()) {
                    write_err = Some(e);
                }
            }
        })?;
        if let Some(e) = write_err {
            return Err(e).with_context(|| format!("writing {}", log_path.display()));
        }
        drop(log);
        report_tables(&dir, &sub, &report.records, &[], &settings)?;
        println!(
            "session {session}: {} events, {} migrations, {} rejected, {} late, {} partial frames",
            report.events,
            report.records.len(),
            report.rejected.len(),
            report.late_events,
            report.partial_frames
        );
        io::stdout().flush()?;
        session += 1;
    }
    Ok(())
}

fn report(args: &ReportArgs, mut settings: Settings, out: &Path) -> Result<()> {
    if let Some(t) = args.threshold {
        settings.classification_threshold = t;
    }
    let mut records = Vec::new();
    for path in &args.logs {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        records.extend(read_migration_log(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?);
    }
    let groups = match &args.process_groups {
        Some(p) => groups_from_events(&load_events(p)?),
        None => Vec::new(),
    };
    let dir = OutDir::create(out)?;
    let text = report_tables(&dir, Path::new(""), &records, &groups, &settings)?;
    dir.manifest(&settings)?;
    let presentations: usize = records.iter().map(|r| r.antigens.len()).sum();
    let (mean, _) = mean_std(&records.iter().map(|r| r.antigens.len() as f64).collect::<Vec<_>>());
    println!(
        "{} migrations, {presentations} presentations, {mean:.2} antigen per cell",
        records.len()
    );
    print!("{text}");
    Ok(())
}
