use launchcurve::breakeven::{backtest_buy_and_hold, BreakevenCurve};
use launchcurve::curve::CurveParams;
use launchcurve::dump::{detect_dumps, dump_summary, DumpConfig, DumpScan};
use launchcurve::estimate::{
    estimate_binned, estimate_curve, identify_top_creators, identify_top_traders, CreatorFilters,
};
use launchcurve::fixed::{self, Lamports};
use launchcurve::ingest::{
    build_trajectories, parse_events, validate_trajectory, write_events_csv, write_events_jsonl,
    ParseOutput, Quarantine, Strictness, TokenTrajectory, Violation,
};
use launchcurve::synth::{generate_market, SynthConfig};
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::args::{
    check_causality, condition_from_set, parse_condition, parse_grid, parse_sol_amount,
    parse_window, resolve_data_path, BacktestArgs, BreakevenArgs, Command, ConditionSpec,
    DumpScanArgs, EstimateArgs, FormatArg, InputArgs, ReportArgs, SynthArgs, ValidateArgs,
};
use crate::error::CliError;
use crate::manifest::{reference_line, RunManifest};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate(args) => cmd_validate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Breakeven(args) => cmd_breakeven(args),
        Command::Backtest(args) => cmd_backtest(args),
        Command::DumpScan(args) => cmd_dump_scan(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn read_log(args: &InputArgs) -> Result<(PathBuf, ParseOutput), CliError> {
    let path = args.resolved_path();
    let file = fs::File::open(&path).map_err(|e| CliError::io(&format!("opening {}", path.display()), e))?;
    let strictness = if args.strict { Strictness::Strict } else { Strictness::Lenient };
    let parsed = parse_events(std::io::BufReader::new(file), args.log_format(), strictness)?;
    Ok((path, parsed))
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::io(&format!("writing {}", path.display()), e))
}

fn note_input_args(manifest: &mut RunManifest, args: &InputArgs) {
    manifest.param("input", args.input.display().to_string());
    manifest.param("format", format!("{:?}", args.log_format()).to_lowercase());
    manifest.param("strict", args.strict);
}

const DETAIL_CAP: usize = 1000;

#[derive(Serialize)]
struct TokenViolations {
    mint: String,
    violations: Vec<Violation>,
}

#[derive(Serialize)]
struct ValidateReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
    input: String,
    n_events: usize,
    n_parse_issues: usize,
    n_tokens: usize,
    n_quarantined: usize,
    n_tokens_with_violations: usize,
    n_violations: usize,
    parse_issues: Vec<String>,
    quarantined: Vec<Quarantine>,
    tokens: Vec<TokenViolations>,
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        return Err(CliError::bad_args(format!("tolerance {} must be a nonnegative number", args.tol)));
    }
    let (path, parsed) = read_log(&args.input)?;
    let params = CurveParams::default();
    let n_events = parsed.events.len();
    let built = build_trajectories(parsed.events, &params);

    let mut tokens = Vec::new();
    let mut n_violations = 0usize;
    let mut detail_left = DETAIL_CAP;
    for traj in built.trajectories.values() {
        let report = validate_trajectory(traj, &params, args.tol);
        if report.violations.is_empty() {
            continue;
        }
        n_violations += report.violations.len();
        if detail_left > 0 {
            let kept: Vec<Violation> = report.violations.into_iter().take(detail_left).collect();
            detail_left -= kept.len();
            tokens.push(TokenViolations { mint: traj.mint.clone(), violations: kept });
        }
    }

    let mut report = ValidateReport {
        manifest: None,
        input: path.display().to_string(),
        n_events,
        n_parse_issues: parsed.issues.len(),
        n_tokens: built.trajectories.len(),
        n_quarantined: built.quarantined.len(),
        n_tokens_with_violations: tokens.len(),
        n_violations,
        parse_issues: parsed
            .issues
            .iter()
            .take(DETAIL_CAP)
            .map(|i| format!("line {}: {}", i.line, i.message))
            .collect(),
        quarantined: built.quarantined,
        tokens,
    };

    if let Some(out) = &args.out {
        let mut manifest = RunManifest::new("validate");
        note_input_args(&mut manifest, &args.input);
        manifest.param("tol", args.tol);
        manifest.add_input(&path)?;
        manifest.add_output(out);
        report.manifest = Some(manifest.write_beside(out)?);
        write_text(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let params = CurveParams::default();
    let spec = parse_condition(&args.condition)?;
    let eval_window = args.window.as_deref().map(parse_window).transpose()?;
    check_causality(&spec, eval_window.as_ref())?;
    let grid = parse_grid(args.grid.as_deref(), &params)?;

    let (path, parsed) = read_log(&args.input)?;
    let wallet_set = match &spec {
        ConditionSpec::TopWallets { k, window } => {
            Some(identify_top_traders(&parsed.events, window, *k).wallets)
        }
        _ => None,
    };
    let built = build_trajectories(parsed.events, &params);
    let set = match &spec {
        ConditionSpec::TopCreators { k, window } => {
            Some(identify_top_creators(&built.trajectories, window, &CreatorFilters::default(), *k).creators)
        }
        _ => wallet_set,
    };
    let condition = condition_from_set(&spec, set.unwrap_or_default());
    let trajs: BTreeMap<String, TokenTrajectory> = match &eval_window {
        Some(w) => built.trajectories.into_iter().filter(|(_, t)| w.contains(t.t_create)).collect(),
        None => built.trajectories,
    };

    let mut manifest = RunManifest::new("estimate");
    note_input_args(&mut manifest, &args.input);
    manifest.param("condition", &args.condition);
    manifest.param("grid", args.grid.as_deref().unwrap_or("default"));
    if let Some(w) = &args.window {
        manifest.param("window", w);
    }
    if let Some(b) = &args.binned {
        manifest.param("binned", b);
    }
    manifest.add_input(&path)?;
    manifest.add_output(&args.out);
    let manifest_name = manifest.write_beside(&args.out)?;

    let (body, n_rows, label) = match &args.binned {
        Some(width_spec) => {
            let width = parse_sol_amount(width_spec, "bin width")?;
            let rows = estimate_binned(&trajs, width, &params)?;
            let mut body = String::from("lo,hi,n_entered,n_graduated,p\n");
            for row in &rows {
                let p = row.p.map(fixed::format_sig12).unwrap_or_else(|| "null".to_string());
                body.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fixed::format_sol(row.lo),
                    fixed::format_sol(row.hi),
                    row.n_entered,
                    row.n_graduated,
                    p
                ));
            }
            (body, rows.len(), format!("binned:{width_spec}"))
        }
        None => {
            let curve = estimate_curve(&trajs, &grid, &condition)?;
            let n = curve.rows.len();
            let label = curve.condition.clone();
            (curve.to_csv(), n, label)
        }
    };
    write_text(&args.out, &(reference_line(&manifest_name) + &body))?;
    println!(
        "{}",
        json!({
            "command": "estimate",
            "condition": label,
            "n_tokens": trajs.len(),
            "rows": n_rows,
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_breakeven(args: BreakevenArgs) -> Result<(), CliError> {
    let params = CurveParams::default();
    let grid = parse_grid(args.grid.as_deref(), &params)?;
    let model = BreakevenCurve::from_params(&params);

    let mut manifest = RunManifest::new("breakeven");
    manifest.param("grid", args.grid.as_deref().unwrap_or("default"));
    manifest.add_output(&args.out);
    let manifest_name = manifest.write_beside(&args.out)?;

    let mut body = String::from("level,breakeven_p,win_multiple\n");
    for &level in grid.levels() {
        let sol = fixed::sol_f64(level);
        body.push_str(&format!(
            "{},{},{}\n",
            fixed::format_sol(level),
            fixed::format_sig12(model.breakeven_probability(sol)?),
            fixed::format_sig12(model.win_multiple(sol)?)
        ));
    }
    write_text(&args.out, &(reference_line(&manifest_name) + &body))?;
    println!(
        "{}",
        json!({
            "command": "breakeven",
            "rows": grid.levels().len(),
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_backtest(args: BacktestArgs) -> Result<(), CliError> {
    let params = CurveParams::default();
    let entry = parse_sol_amount(&args.entry, "entry level")?;
    let (path, parsed) = read_log(&args.input)?;
    let built = build_trajectories(parsed.events, &params);
    let result = backtest_buy_and_hold(&built.trajectories, entry, &params)?;

    let mut manifest = RunManifest::new("backtest");
    note_input_args(&mut manifest, &args.input);
    manifest.param("entry", &args.entry);
    manifest.add_input(&path)?;
    manifest.add_output(&args.out);
    let manifest_name = manifest.write_beside(&args.out)?;

    let mut body = String::from("mint,graduated,return\n");
    for token in &result.per_token {
        body.push_str(&format!(
            "{},{},{}\n",
            token.mint,
            token.graduated,
            fixed::format_sig12(token.ret)
        ));
    }
    write_text(&args.out, &(reference_line(&manifest_name) + &body))?;
    println!(
        "{}",
        json!({
            "command": "backtest",
            "entry": fixed::format_sol(result.entry_level),
            "n_entered": result.n_entered,
            "n_graduated": result.n_graduated,
            "p_hat": result.p_hat,
            "win_multiple": result.win_multiple,
            "mean_return": result.mean_return,
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))
}

/// Threshold multipliers swept by the dump summary's coverage table.
const COVERAGE_MULTIPLIERS: [f64; 10] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

fn cmd_dump_scan(args: DumpScanArgs) -> Result<(), CliError> {
    let params = CurveParams::default();
    let config_path = args.config.as_deref().map(resolve_data_path);
    let mut config: DumpConfig = match &config_path {
        Some(p) => load_toml(p)?,
        None => DumpConfig::default(),
    };
    if let Some(sigma) = args.sigma {
        config.sigma_multiplier = sigma;
    }
    if !(config.sigma_multiplier.is_finite() && config.sigma_multiplier > 0.0) {
        return Err(CliError::bad_args(format!(
            "threshold multiplier {} must be positive",
            config.sigma_multiplier
        )));
    }

    let (path, parsed) = read_log(&args.input)?;
    let built = build_trajectories(parsed.events, &params);
    let scans: Vec<DumpScan> = built.trajectories.values().map(|t| detect_dumps(t, &config)).collect();

    let mut manifest = RunManifest::new("dump-scan");
    note_input_args(&mut manifest, &args.input);
    manifest.param("detector", &config);
    manifest.add_input(&path)?;
    if let Some(p) = &config_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(&args.out);
    if let Some(summary_path) = &args.summary {
        manifest.add_output(summary_path);
    }
    let manifest_name = manifest.write_beside(&args.out)?;

    let mut body = String::from(
        "mint,trigger_index,trigger_return,n_returns,drop_frac,v_sol_at_trigger,n_sellers,single_wallet,sellers\n",
    );
    let mut n_episodes = 0usize;
    for scan in &scans {
        for ep in &scan.episodes {
            n_episodes += 1;
            let sellers: Vec<&str> = ep.seller_wallets.iter().map(String::as_str).collect();
            body.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                ep.mint,
                ep.trigger_index,
                fixed::format_sig12(ep.trigger_return),
                ep.n_returns,
                fixed::format_sig12(ep.drop_frac),
                fixed::format_sol(ep.v_sol_at_trigger),
                ep.seller_wallets.len(),
                ep.single_wallet,
                sellers.join(";")
            ));
        }
    }
    write_text(&args.out, &(reference_line(&manifest_name) + &body))?;

    let summary = dump_summary(&scans, &COVERAGE_MULTIPLIERS);
    if let Some(summary_path) = &args.summary {
        let wrapped = json!({
            "manifest": manifest_name,
            "detector": config,
            "summary": summary,
        });
        write_text(summary_path, &(serde_json::to_string_pretty(&wrapped)? + "\n"))?;
    }
    println!(
        "{}",
        json!({
            "command": "dump-scan",
            "n_tokens": summary.n_tokens,
            "n_scanned": summary.n_scanned,
            "n_tokens_with_dump": summary.n_tokens_with_dump,
            "n_episodes": n_episodes,
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let config_path = args.config.as_deref().map(resolve_data_path);
    let mut config: SynthConfig = match &config_path {
        Some(p) => load_toml(p)?,
        None => SynthConfig::default(),
    };
    if let Some(tokens) = args.tokens {
        config.n_tokens = tokens;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let params = CurveParams::default();
    let events = generate_market(&config, &params)?;

    let mut manifest = RunManifest::new("synth");
    manifest.param("config", &config);
    manifest.param("format", format!("{:?}", args.format).to_lowercase());
    manifest.seed = Some(config.seed);
    if let Some(p) = &config_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(&args.out);
    let manifest_name = manifest.write_beside(&args.out)?;

    let file = fs::File::create(&args.out)
        .map_err(|e| CliError::io(&format!("creating {}", args.out.display()), e))?;
    let mut writer = BufWriter::new(file);
    writer
        .write_all(reference_line(&manifest_name).as_bytes())
        .map_err(|e| CliError::io("writing log header", e))?;
    match args.format {
        FormatArg::Jsonl => write_events_jsonl(&events, &mut writer)?,
        FormatArg::Csv => write_events_csv(&events, &mut writer)?,
    }
    writer.into_inner().map_err(|e| CliError::io("flushing log", e.into_error()))?;
    println!(
        "{}",
        json!({
            "command": "synth",
            "n_tokens": config.n_tokens,
            "n_events": events.len(),
            "seed": config.seed,
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

struct CurveColumn {
    label: String,
    by_level: BTreeMap<Lamports, String>,
}

fn read_curve_csv(path: &Path) -> Result<CurveColumn, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
    let malformed = |line_no: usize, msg: &str| {
        CliError::new("parse", format!("{} line {line_no}: {msg}", path.display()))
    };
    let mut label = None;
    let mut by_level = BTreeMap::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if trimmed != "level,n_eligible,n_graduated,p,condition" {
                return Err(malformed(line_no, "not an estimate curve header"));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() < 5 {
            return Err(malformed(line_no, "expected 5 fields"));
        }
        let level = fixed::parse_sol(fields[0]).map_err(|e| malformed(line_no, &e.to_string()))?;
        // maxtrades conditions carry a comma, so the tail beyond p is the
        // condition text
        let condition = fields[4..].join(",");
        match &label {
            None => label = Some(condition),
            Some(prev) if *prev != condition => {
                return Err(malformed(line_no, "mixed condition labels in one file"));
            }
            Some(_) => {}
        }
        by_level.insert(level, fields[3].to_string());
    }
    let label = label.ok_or_else(|| CliError::new("parse", format!("{}: no curve rows", path.display())))?;
    Ok(CurveColumn { label, by_level })
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let params = CurveParams::default();
    let model = BreakevenCurve::from_params(&params);

    let mut columns = Vec::new();
    let mut resolved = Vec::new();
    for path in &args.curves {
        let path = resolve_data_path(path);
        columns.push(read_curve_csv(&path)?);
        resolved.push(path);
    }

    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let labels: Vec<String> = columns
        .iter()
        .map(|c| {
            let base = c.label.replace(',', "+");
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}#{n}")
            }
        })
        .collect();

    let mut levels: Vec<Lamports> = Vec::new();
    for column in &columns {
        levels.extend(column.by_level.keys().copied());
    }
    levels.sort_unstable();
    levels.dedup();

    let mut manifest = RunManifest::new("report");
    manifest.param(
        "curves",
        args.curves.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    );
    for path in &resolved {
        manifest.add_input(path)?;
    }
    manifest.add_output(&args.out);
    let manifest_name = manifest.write_beside(&args.out)?;

    let mut body = String::from("level");
    for label in &labels {
        body.push_str(&format!(",p[{label}]"));
    }
    body.push_str(",breakeven_p\n");
    for &level in &levels {
        body.push_str(&fixed::format_sol(level));
        for column in &columns {
            let p = column.by_level.get(&level).map(String::as_str).unwrap_or("null");
            body.push(',');
            body.push_str(p);
        }
        let breakeven = model.breakeven_probability(fixed::sol_f64(level))?;
        body.push_str(&format!(",{}\n", fixed::format_sig12(breakeven)));
    }
    write_text(&args.out, &(reference_line(&manifest_name) + &body))?;
    println!(
        "{}",
        json!({
            "command": "report",
            "curves": labels,
            "rows": levels.len(),
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}
