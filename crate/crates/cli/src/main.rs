use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ornstein_core::certify::{self, check_replay, Certificate, PipelineConfig};
use ornstein_core::exact::{format_rational, parse_rational, MultiIndex};
use ornstein_core::frequency::{delta_preset, select_sequence, verify_sequence, AdmissibleSequence, Mode, SigmaSeq};
use ornstein_core::growth::{self, GrowthConfig, SigmaPolicy};
use ornstein_core::hypothesis::{check_pair, search_witnesses, DEFAULT_SEARCH_BOUND};
use ornstein_core::norm::{l1_coeff_bounds, Estimator, EstimatorConfig, GridOptions, MonteCarloOptions};
use ornstein_core::report::{emit_plot, PlotOptions, Table};
use ornstein_core::riesz::{build_z, decompose, derivative_poly, expand_riesz, DerivativeFamily, Oscillator};

const DEFAULT_FAMILY: &str = "4,0;3,2;2,4;1,6;0,8";

#[derive(Parser, Debug)]
#[command(name = "ornstein", version, about = "Riesz-product witnesses for L1 non-inequalities on the 2-torus")]
struct Cli {
    /// Worker threads (defaults to ORNSTEIN_THREADS, then all cores).
    #[arg(long, global = true, env = "ORNSTEIN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check given equalizer and orderer vectors against a multiindex family.
    CheckHypothesis {
        #[arg(long, default_value = DEFAULT_FAMILY)]
        alphas: String,
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        gamma: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search the smallest equalizer and orderer vectors in a box.
    SearchWitnesses {
        #[arg(long, default_value = DEFAULT_FAMILY)]
        alphas: String,
        #[arg(long, default_value_t = DEFAULT_SEARCH_BOUND)]
        bound: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and verify an admissible frequency sequence.
    SelectFrequencies {
        #[command(flatten)]
        seq: SeqArgs,
        /// Verification: exhaustive, interval, or auto (exhaustive for n <= 9).
        #[arg(long, default_value = "auto")]
        verify: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expand Z and its derivative decomposition for a sequence.
    BuildWitness {
        #[command(flatten)]
        seq: SeqArgs,
        /// Include the full coefficient lists of Z and every derivative.
        #[arg(long)]
        coefficients: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate L1 norms of the derivative polynomials and product parts.
    EstimateNorms {
        #[command(flatten)]
        seq: SeqArgs,
        #[command(flatten)]
        est: EstArgs,
        /// Comma-separated powers l to estimate (default: all).
        #[arg(long)]
        l: Option<String>,
        /// What to estimate: derivative, product, or riesz.
        #[arg(long, default_value = "derivative")]
        target: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the growth in m of the lacunary sum-product form.
    LemmaGrowth {
        #[arg(long, default_value_t = 10)]
        m_max: u32,
        #[arg(long, default_value = "20")]
        lacunarity: String,
        /// "ones", "search", or a 0/1 list such as "1,0,1".
        #[arg(long, default_value = "ones")]
        sigma: String,
        #[arg(long, default_value = "cosine")]
        oscillator: String,
        #[arg(long, default_value_t = 1)]
        base: u64,
        /// Also fit at each lacunarity in this comma-separated list.
        #[arg(long)]
        scan: Option<String>,
        #[command(flatten)]
        est: EstArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the full pipeline and write a certificate (exit 2 when K is not reached).
    Certify {
        #[arg(long = "K", short = 'K')]
        k: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "compact")]
        mode: String,
        #[arg(long)]
        c_hat: Option<f64>,
        #[arg(long, default_value_t = 1 << 24)]
        max_bits: u64,
        #[arg(long, default_value_t = 9)]
        exact_limit: usize,
        #[command(flatten)]
        est: EstArgs,
        /// Replay an existing certificate instead of running the pipeline.
        #[arg(long, conflicts_with_all = ["k", "n"])]
        replay: Option<PathBuf>,
        #[arg(long)]
        summary: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a CSV table as an SVG line chart.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Option<String>,
        #[arg(long, requires = "intercept")]
        slope: Option<f64>,
        #[arg(long, requires = "slope")]
        intercept: Option<f64>,
        /// Take the fitted line from a lemma-growth JSON file.
        #[arg(long, conflicts_with = "slope")]
        fit_json: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SeqArgs {
    /// Read the sequence from a select-frequencies JSON file.
    #[arg(long, conflicts_with_all = ["n", "delta"])]
    sequence: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    m: u32,
    #[arg(long, default_value = "compact")]
    mode: String,
    #[arg(long, default_value = "ones")]
    sigma: String,
    /// Tolerance override (defaults to the mode preset).
    #[arg(long)]
    delta: Option<String>,
}

#[derive(Args, Debug)]
struct EstArgs {
    /// auto, grid, or montecarlo.
    #[arg(long, default_value = "auto")]
    estimator: String,
    #[arg(long, default_value_t = 1 << 17)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ornstein_core::norm::DEFAULT_CONFIDENCE)]
    confidence: f64,
    #[arg(long, default_value_t = 4)]
    oversample: u32,
    #[arg(long, default_value_t = 1 << 24)]
    max_points: u64,
}

impl EstArgs {
    fn config(&self) -> Result<EstimatorConfig> {
        Ok(EstimatorConfig {
            estimator: self.estimator.parse::<Estimator>()?,
            grid: GridOptions { oversample: self.oversample, max_points: self.max_points, ..GridOptions::default() },
            mc: MonteCarloOptions { samples: self.samples, seed: self.seed, confidence: self.confidence },
        })
    }
}

impl SeqArgs {
    fn load(&self) -> Result<AdmissibleSequence> {
        if let Some(path) = &self.sequence {
            let v: Value = read_json(path)?;
            let seq = v.get("sequence").cloned().unwrap_or(v);
            return serde_json::from_value(seq).with_context(|| format!("parsing sequence in {}", path.display()));
        }
        let mode: Mode = self.mode.parse()?;
        let sigma = SigmaSeq::parse(&self.sigma, self.n)?;
        let delta = match &self.delta {
            Some(d) => parse_rational(d)?,
            None => delta_preset(mode, self.n),
        };
        Ok(select_sequence(self.n, self.m, &sigma, &delta, mode)?)
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json(out: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(out, &text)
}

fn parse_l_list(s: &Option<String>, m: u32) -> Result<Vec<u32>> {
    match s {
        None => Ok((0..=m).collect()),
        Some(s) => s
            .split(',')
            .map(|t| {
                let l: u32 = t.trim().parse().with_context(|| format!("bad power {t:?}"))?;
                if l > m {
                    bail!("power {l} exceeds m = {m}");
                }
                Ok(l)
            })
            .collect(),
    }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        if t == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::CheckHypothesis { alphas, lambda, gamma, out } => {
            let alphas = MultiIndex::parse_list(&alphas)?;
            let report = check_pair(&alphas, &MultiIndex::parse(&lambda)?, &MultiIndex::parse(&gamma)?)?;
            write_json(out.as_deref(), &report)?;
        }
        Command::SearchWitnesses { alphas, bound, out } => {
            let alphas = MultiIndex::parse_list(&alphas)?;
            let value = match search_witnesses(&alphas, bound)? {
                Some((l, g)) => json!({ "found": true, "report": check_pair(&alphas, &l, &g)? }),
                None => json!({ "found": false, "bound": bound }),
            };
            write_json(out.as_deref(), &value)?;
        }
        Command::SelectFrequencies { seq, verify, out } => {
            let s = seq.load()?;
            let exhaustive = match verify.as_str() {
                "exhaustive" => true,
                "interval" => false,
                "auto" => s.n <= 9,
                other => bail!("unknown verification {other:?} (exhaustive|interval|auto)"),
            };
            let report = verify_sequence(&s, exhaustive);
            write_json(out.as_deref(), &json!({ "sequence": s, "conditions": report, "remainder_bounds": report.remainder_sum_bounds().iter().map(format_rational).collect::<Vec<_>>() }))?;
            if !report.passed() {
                bail!("sequence fails verification: {}", report.violations.join("; "));
            }
        }
        Command::BuildWitness { seq, coefficients, out } => {
            let s = seq.load()?;
            let family = DerivativeFamily::default();
            let z = build_z(&s, &family.alpha0)?;
            let riesz = expand_riesz(&s.freqs)?;
            let identity = derivative_poly(&s, &family, 0)? == riesz;
            let mut parts = Vec::new();
            for l in 1..=s.m {
                let (rem, prod) = decompose(&s, &family, l)?;
                let reassembled = rem.add(&prod.to_derivative_part()) == derivative_poly(&s, &family, l)?;
                let mut entry = json!({
                    "l": l,
                    "alpha": family.alpha(l)?,
                    "remainder_coeff_sum": format_rational(&ornstein_core::riesz::coeff_sum(&rem)),
                    "product": prod,
                    "reassembles": reassembled,
                });
                if coefficients {
                    entry["remainder"] = serde_json::to_value(&rem)?;
                    entry["derivative"] = serde_json::to_value(derivative_poly(&s, &family, l)?)?;
                }
                parts.push(entry);
            }
            let mut value = json!({
                "sequence": s,
                "family": family,
                "support_size": z.len(),
                "riesz_identity": identity,
                "decomposition": parts,
            });
            if coefficients {
                value["z"] = serde_json::to_value(&z)?;
            }
            write_json(out.as_deref(), &value)?;
        }
        Command::EstimateNorms { seq, est, l, target, out } => {
            let s = seq.load()?;
            let cfg = est.config()?;
            let family = DerivativeFamily::default();
            let mut rows = Vec::new();
            match target.as_str() {
                "riesz" => {
                    let p = expand_riesz(&s.freqs)?;
                    rows.push(json!({ "target": "riesz", "estimate": cfg.estimate(&p)?, "coeff_bounds": l1_coeff_bounds(&p) }));
                }
                "derivative" => {
                    for l in parse_l_list(&l, s.m)? {
                        let p = derivative_poly(&s, &family, l)?;
                        rows.push(json!({ "target": "derivative", "l": l, "estimate": cfg.estimate(&p)?, "coeff_bounds": l1_coeff_bounds(&p) }));
                    }
                }
                "product" => {
                    for l in parse_l_list(&l, s.m)?.into_iter().filter(|&l| l >= 1) {
                        let f = ornstein_core::riesz::product_part(&s, l)?;
                        rows.push(json!({ "target": "product", "l": l, "estimate": cfg.estimate(&f)? }));
                    }
                }
                other => bail!("unknown target {other:?} (derivative|product|riesz)"),
            }
            write_json(out.as_deref(), &json!({ "sequence": s, "estimates": rows }))?;
        }
        Command::LemmaGrowth { m_max, lacunarity, sigma, oscillator, base, scan, est, out, csv, svg } => {
            let mut cfg = GrowthConfig::new(m_max, parse_rational(&lacunarity)?, oscillator.parse::<Oscillator>()?, est.config()?);
            cfg.base = base;
            cfg.sigma = match sigma.as_str() {
                "ones" => SigmaPolicy::Ones,
                "search" => SigmaPolicy::Search,
                list => SigmaPolicy::Fixed(SigmaSeq::parse(list, m_max as usize)?),
            };
            let fit = growth::growth_experiment(&cfg)?;
            let mut value = serde_json::to_value(&fit)?;
            if let Some(scan) = scan {
                let ms = scan.split(',').map(|t| parse_rational(t.trim())).collect::<ornstein_core::Result<Vec<_>>>()?;
                let results = growth::lacunarity_scan(&cfg, &ms)?;
                value["scan"] = json!(results.iter().map(|(m, s)| json!({ "lacunarity": format_rational(m), "slope": s })).collect::<Vec<_>>());
                value["stabilizes_at"] = json!(growth::stabilization_point(&results, 0.1).map(|m| format_rational(&m)));
            }
            let table = fit.to_table();
            if let Some(p) = &csv {
                write_text(Some(p), &table.to_csv())?;
            }
            if let Some(p) = &svg {
                let title = format!("{} growth, M = {}", format!("{:?}", fit.oscillator).to_lowercase(), lacunarity);
                let opts = PlotOptions { fit: Some((fit.slope, fit.intercept)), title: Some(title), ..Default::default() };
                write_text(Some(p), &emit_plot(&table, &opts)?)?;
            }
            write_json(out.as_deref(), &value)?;
        }
        Command::Certify { k, n, mode, c_hat, max_bits, exact_limit, est, replay, summary, out } => {
            let cert: Certificate = if let Some(path) = replay {
                let cert: Certificate = serde_json::from_value(read_json(&path)?)?;
                if !check_replay(&cert)? {
                    bail!("certificate {} does not replay", path.display());
                }
                cert
            } else {
                let Some(k) = k else { bail!("--K is required unless --replay is given") };
                let mut cfg = PipelineConfig::new(parse_rational(&k)?, mode.parse()?, est.seed);
                cfg.n = n;
                cfg.c_hat = c_hat;
                cfg.max_bits = max_bits;
                cfg.exact_limit = exact_limit;
                cfg.samples = est.samples;
                cfg.confidence = est.confidence;
                cfg.estimator = est.estimator.parse()?;
                certify::run_pipeline(&cfg)?
            };
            if summary {
                eprint!("{}", cert.summary());
            }
            write_json(out.as_deref(), &cert)?;
            if !cert.verdict {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Plot { csv, x, y, slope, intercept, fit_json, title, out } => {
            let text = fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            let table = Table::parse_csv(&text)?;
            let fit = match (slope, intercept, fit_json) {
                (Some(s), Some(c), _) => Some((s, c)),
                (_, _, Some(p)) => {
                    let v = read_json(&p)?;
                    let get = |k: &str| v.get(k).and_then(Value::as_f64).with_context(|| format!("{} has no {k}", p.display()));
                    Some((get("slope")?, get("intercept")?))
                }
                _ => None,
            };
            write_text(out.as_deref(), &emit_plot(&table, &PlotOptions { x, y, fit, title })?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
