//! Command-line front end for the gsvi surface toolkit.
//!
//! Commands: `check`, `grid`, `density`, `bounds`, `moments`, `oracle`.
//! Surfaces come from `--surface` plus family parameters, or from a
//! `key=value` config file (`--config`); flags win over the file. Exit codes:
//! 0 clean, 1 arbitrage found, 2 configuration error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use gsvi::bs;
use gsvi::butterfly::sym_svi;
use gsvi::check::{CheckConfig, CheckReport, run_check};
use gsvi::config::SurfaceConfig;
use gsvi::density;
use gsvi::error::GsviError;
use gsvi::num;
use gsvi::shape::Side;
use gsvi::surface::Surface;

#[derive(Parser)]
#[command(
    name = "gsvi",
    about = "Generalised SVI total-variance surfaces: arbitrage checks, densities, bounds and moments",
    after_help = "\
OUTPUT COLUMNS
  grid     k,t,w,g,sigma2_loc      g is the density operator (Dupire denominator)
  density  k,p_minus,p_plus,cdf    atoms appended as '# atom,<k>,<mass>' lines
  bounds   u,y_star,a_star,numeric_bound   closed forms vs scanned infimum, u < 4

Numbers are printed with 17 significant digits; identical configuration and
seed produce byte-identical files."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SurfaceArgs {
    /// Surface family: svi | nonsvi_sqrt | nonsvi_power
    #[arg(long)]
    surface: Option<String>,
    /// Config file with key=value lines (flags override it)
    #[arg(long)]
    config: Option<PathBuf>,
    /// SVI skew, in (-1, 1)
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Power-law exponent, > 1
    #[arg(long)]
    nu: Option<f64>,
    /// Scale parameter of the phi family, > 0
    #[arg(long)]
    alpha: Option<f64>,
    /// Scale family: decay | const | invsq
    #[arg(long)]
    phi_kind: Option<String>,
    /// ATM variance family: linear | power | saturating
    #[arg(long)]
    theta_kind: Option<String>,
    /// Level of the linear/power ATM variance
    #[arg(long)]
    theta_a: Option<f64>,
    /// Exponent of the power ATM variance, in (0, 1]
    #[arg(long)]
    theta_p: Option<f64>,
    /// Rate of the saturating ATM variance
    #[arg(long)]
    theta_lambda: Option<f64>,
    /// Long-run level of the saturating ATM variance
    #[arg(long)]
    theta_inf: Option<f64>,
}

impl SurfaceArgs {
    fn resolve(&self) -> Result<Surface, GsviError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| GsviError::Config {
                    message: format!("cannot read {}: {e}", path.display()),
                })?;
                SurfaceConfig::parse(&text)?
            }
            None => SurfaceConfig::default(),
        };
        if let Some(kind) = &self.surface {
            config.psi_kind = kind.clone();
            // family parameters that no longer apply are dropped
            if kind != "svi" {
                config.rho = None;
            }
            if kind != "nonsvi_power" {
                config.nu = None;
            }
        }
        if let Some(rho) = self.rho {
            config.rho = Some(rho);
        }
        if let Some(nu) = self.nu {
            config.nu = Some(nu);
        }
        if let Some(alpha) = self.alpha {
            config.alpha = alpha;
        }
        if let Some(kind) = &self.phi_kind {
            config.phi_kind = kind.clone();
        }
        if let Some(kind) = &self.theta_kind {
            config.theta_kind = kind.clone();
        }
        if let Some(a) = self.theta_a {
            config.theta_a = Some(a);
        }
        if let Some(p) = self.theta_p {
            config.theta_p = Some(p);
        }
        if let Some(lambda) = self.theta_lambda {
            config.theta_lambda = Some(lambda);
        }
        if let Some(inf) = self.theta_inf {
            config.theta_inf = Some(inf);
        }
        config.build()
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format for tabular commands: csv | json
    #[arg(long, default_value = "csv")]
    format: String,
}

fn parse_list(raw: &str, what: &str) -> Result<Vec<f64>, GsviError> {
    let values: Result<Vec<f64>, _> = raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
    values.map_err(|_| GsviError::Config {
        message: format!("{what}: expected comma-separated numbers, got {raw:?}"),
    })
}

#[derive(Subcommand)]
enum Command {
    /// Run the full no-arbitrage battery and report margins and witnesses
    Check {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Maturities checked by the convexity oracle (comma-separated)
        #[arg(long, default_value = "0.1,0.5,1,2,5,10")]
        t: String,
        /// Left edge of the log-moneyness window
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
        k_min: f64,
        /// Right edge of the log-moneyness window
        #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
        k_max: f64,
        /// Number of strikes in the window
        #[arg(long, default_value_t = 2001)]
        k_n: usize,
        /// Margin tolerance of the analytic verdicts
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Output file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate w, the density operator and local variance on a (k, t) grid
    Grid {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
        k_min: f64,
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        k_max: f64,
        #[arg(long, default_value_t = 201)]
        k_n: usize,
        /// Maturities (comma-separated)
        #[arg(long, default_value = "0.25,0.5,1,2")]
        t: String,
    },
    /// Extract the risk-neutral density of one maturity slice
    Density {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Maturity of the slice
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = -40.0, allow_negative_numbers = true)]
        k_min: f64,
        #[arg(long, default_value_t = 40.0, allow_negative_numbers = true)]
        k_max: f64,
        #[arg(long, default_value_t = 16001)]
        k_n: usize,
    },
    /// Closed-form vs numeric butterfly bounds for the symmetric SVI shape
    Bounds {
        #[command(flatten)]
        output: OutputArgs,
        /// Variance levels (comma-separated); rows are kept for u < 4
        #[arg(long, default_value = "0.1,0.5,1,2,3,3.9")]
        u: String,
    },
    /// Wing slope, critical moment and its quadrature bracket for one slice
    Moments {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Maturity of the slice
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Seed of the Monte Carlo martingale check
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Sample count of the Monte Carlo martingale check
        #[arg(long, default_value_t = 100_000)]
        mc_n: usize,
        /// Output file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force convexity and monotonicity oracles only
    Oracle {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Maturities for the convexity oracle (comma-separated)
        #[arg(long, default_value = "0.1,0.5,1,2,5,10")]
        t: String,
        /// Log-moneyness points for the monotonicity oracle (comma-separated)
        #[arg(long, default_value = "-2,-1,0,1,2", allow_hyphen_values = true)]
        k: String,
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
        k_min: f64,
        #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
        k_max: f64,
        #[arg(long, default_value_t = 2001)]
        k_n: usize,
        /// Output file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), GsviError> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| GsviError::Config {
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| GsviError::Config {
                    message: format!("cannot write to stdout: {e}"),
                })
        }
    }
}

fn json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    text
}

fn run() -> Result<ExitCode, GsviError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Check {
            surface,
            t,
            k_min,
            k_max,
            k_n,
            tol,
            out,
        } => {
            let surface = surface.resolve()?;
            let t_list = parse_list(&t, "--t")?;
            let config = CheckConfig {
                t_list,
                k_min,
                k_max,
                k_n,
                tol,
                ..CheckConfig::default()
            };
            let report: CheckReport = run_check(&surface, &config)?;
            let pass = report.pass;
            write_output(&out, &json_pretty(&report))?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Grid {
            surface,
            output,
            k_min,
            k_max,
            k_n,
            t,
        } => {
            let surface = surface.resolve()?;
            let t_list = parse_list(&t, "--t")?;
            if k_n < 3 || k_min >= k_max || k_min.is_nan() || k_max.is_nan() {
                return Err(GsviError::Config {
                    message: "grid needs k_min < k_max and k_n >= 3".to_string(),
                });
            }
            let ks = num::linspace(k_min, k_max, k_n);
            let mut rows = Vec::new();
            for &t in &t_list {
                let slice = surface.slice(t)?;
                for &k in &ks {
                    let w = surface.total_variance(k, t)?;
                    let g = if slice.is_kink(k) {
                        0.5 * (bs::g_sided(&slice, k, Side::Left)
                            + bs::g_sided(&slice, k, Side::Right))
                    } else {
                        bs::g_sided(&slice, k, Side::Right)
                    };
                    let d_t = if slice.is_kink(k) {
                        surface.partials_side(k, t, Side::Right)?.d_t
                    } else {
                        surface.partials(k, t)?.d_t
                    };
                    let local_var = if g > 0.0 { d_t / g } else { f64::NAN };
                    rows.push((k, t, w, g, local_var));
                }
            }
            let content = match output.format.as_str() {
                "csv" => {
                    let mut text = String::from("k,t,w,g,sigma2_loc\n");
                    for (k, t, w, g, lv) in &rows {
                        text.push_str(&format!("{k:.16e},{t:.16e},{w:.16e},{g:.16e},{lv:.16e}\n"));
                    }
                    text
                }
                "json" => {
                    let values: Vec<serde_json::Value> = rows
                        .iter()
                        .map(|(k, t, w, g, lv)| {
                            serde_json::json!({"k": k, "t": t, "w": w, "g": g, "sigma2_loc": lv})
                        })
                        .collect();
                    json_pretty(&values)
                }
                other => {
                    return Err(GsviError::Config {
                        message: format!("unknown format {other:?}"),
                    });
                }
            };
            write_output(&output.out, &content)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Density {
            surface,
            output,
            t,
            k_min,
            k_max,
            k_n,
        } => {
            let surface = surface.resolve()?;
            let grid = num::linspace(k_min, k_max, k_n);
            let slice = density::extract_density(&surface, t, &grid)?;
            let content = match output.format.as_str() {
                "csv" => slice.to_csv(),
                "json" => json_pretty(&serde_json::json!({
                    "t": slice.t,
                    "k": slice.k_grid,
                    "p_minus": slice.p_minus,
                    "p_plus": slice.p_plus,
                    "cdf": slice.cdf,
                    "atoms": slice.atoms,
                    "mass": slice.mass,
                    "mean_exp": slice.mean_exp,
                })),
                other => {
                    return Err(GsviError::Config {
                        message: format!("unknown format {other:?}"),
                    });
                }
            };
            write_output(&output.out, &content)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bounds { output, u } => {
            let u_list = parse_list(&u, "--u")?;
            let shape = gsvi::shape::SmileShape::svi(0.0).expect("rho = 0 is valid");
            let mut rows = Vec::new();
            for &u in u_list.iter().filter(|&&u| (0.0..4.0).contains(&u)) {
                let y = sym_svi::y_argmin(u)?;
                let a_star = sym_svi::a_star(u)?;
                let numeric = gsvi::butterfly::butterfly_bound(
                    &shape,
                    u,
                    gsvi::butterfly::RegionKind::ZBarPlus,
                );
                rows.push((u, y, a_star, numeric.bound));
            }
            let content = match output.format.as_str() {
                "csv" => {
                    let mut text = String::from("u,y_star,a_star,numeric_bound\n");
                    for (u, y, a, n) in &rows {
                        text.push_str(&format!("{u:.16e},{y:.16e},{a:.16e},{n:.16e}\n"));
                    }
                    text
                }
                "json" => {
                    let values: Vec<serde_json::Value> = rows
                        .iter()
                        .map(|(u, y, a, n)| {
                            serde_json::json!({"u": u, "y_star": y, "a_star": a, "numeric_bound": n})
                        })
                        .collect();
                    json_pretty(&values)
                }
                other => {
                    return Err(GsviError::Config {
                        message: format!("unknown format {other:?}"),
                    });
                }
            };
            write_output(&output.out, &content)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Moments {
            surface,
            t,
            seed,
            mc_n,
            out,
        } => {
            let surface = surface.resolve()?;
            let report = density::critical_moment(&surface, t)?;
            // seeded martingale check: sample log-moneyness, average e^k
            let grid = density::default_density_grid();
            let slice = density::extract_density(&surface, t, &grid)?;
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let uniforms: Vec<f64> = (0..mc_n)
                .map(|_| ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64)
                .collect();
            let samples = slice.inverse_cdf_sample(&uniforms)?;
            let mc_mean_exp = samples.iter().map(|k| k.exp()).sum::<f64>() / mc_n as f64;
            let payload = serde_json::json!({
                "t": t,
                "alpha": report.alpha,
                "alpha_fit": report.alpha_fit,
                "m_star": report.m_star,
                "m_star_tail_rate": report.m_star_tail_rate,
                "bracket": [report.bracket.0, report.bracket.1],
                "mc_mean_exp": mc_mean_exp,
                "mc_samples": mc_n,
                "seed": seed,
            });
            write_output(&out, &json_pretty(&payload))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            surface,
            t,
            k,
            k_min,
            k_max,
            k_n,
            out,
        } => {
            let surface = surface.resolve()?;
            let t_list = parse_list(&t, "--t")?;
            let k_list = parse_list(&k, "--k")?;
            let strikes: Vec<f64> = num::linspace(k_min, k_max, k_n)
                .into_iter()
                .map(f64::exp)
                .collect();
            let times = bs::default_time_grid();
            let mut convexity = Vec::new();
            for &t in &t_list {
                convexity.push(bs::convexity_oracle(&surface, t, &strikes)?);
            }
            let mut monotonicity = Vec::new();
            for &k in &k_list {
                monotonicity.push(bs::monotonicity_oracle(&surface, k, &times)?);
            }
            let pass = convexity.iter().all(|o| o.passes(1e-10))
                && monotonicity.iter().all(|o| o.passes(1e-10));
            let payload = serde_json::json!({
                "pass": pass,
                "convexity": convexity,
                "monotonicity": monotonicity,
            });
            write_output(&out, &json_pretty(&payload))?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                // arbitrage found during an operation that needs a clean slice
                GsviError::Arbitrage { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
