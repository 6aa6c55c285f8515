//! `e8kem`: key-exchange demos, failure-bound analysis and χ tables.

use std::fmt::Write as _;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use e8kem::failure_analysis::{
    cca_advantage_bound, cubic_pe_bound, optimize_alpha, pe_bound, AnalysisError, AnalysisOptions,
};
use e8kem::kex::{bandwidth_bytes, public_key_bytes, Kem, KexError};
use e8kem::noise::{ChiDivergence, ChiTable, NoiseError};
use e8kem::params::{published, Encoder, ParamError, ParamSet};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Parser)]
#[command(name = "e8kem", version, about = "LWE key encapsulation with E8 lattice encoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run keygen/encaps/decaps repeatedly and report agreement and sizes.
    Demo {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: u64,
    },
    /// Failure-probability bound, bandwidth and Renyi-divergence figures for one set.
    Analyze {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Computed bandwidth and failure bounds for all nine built-in sets next to the published ones.
    Table2 {
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Write the 16-bit χ table for a given sigma.
    ChiTable {
        #[arg(long, allow_negative_numbers = true)]
        sigma: f64,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Built-in parameter set; --n/--q/--sigma/--ell override its fields.
    #[arg(long, default_value = "modified-bw-640")]
    paramset: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long)]
    ell: Option<usize>,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    #[arg(long, default_value_t = 4096)]
    grid_cells: usize,
    /// Merge support points upward when a distribution outgrows the size limit.
    #[arg(long)]
    coarsen: bool,
    /// Largest support a convolution may produce (default 2^18, or 2^15 with --coarsen).
    #[arg(long)]
    max_support: Option<usize>,
    /// Comma-separated output.
    #[arg(long)]
    csv: bool,
}

impl AnalysisArgs {
    fn options(&self) -> AnalysisOptions {
        let default_limit = if self.coarsen { 1 << 15 } else { AnalysisOptions::default().max_support };
        AnalysisOptions {
            grid_cells: self.grid_cells.max(1),
            coarsen: self.coarsen,
            max_support: self.max_support.unwrap_or(default_limit).max(2),
            ..Default::default()
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Limit(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Limit(_) => 2,
        }
    }
}

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<NoiseError> for Failure {
    fn from(e: NoiseError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<KexError> for Failure {
    fn from(e: KexError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::SizeLimit { .. } => Failure::Limit(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn resolve(args: &ParamArgs) -> Result<ParamSet, Failure> {
    let base = ParamSet::by_name(&args.paramset)?;
    if args.n.is_none() && args.q.is_none() && args.sigma.is_none() && args.ell.is_none() {
        return Ok(base);
    }
    let p = ParamSet::new(
        "custom",
        args.n.unwrap_or(base.n()),
        args.q.unwrap_or(base.q()),
        args.sigma.unwrap_or(base.sigma()),
        args.ell.unwrap_or(base.ell()),
    )?;
    Ok(p)
}

fn demo(p: &ParamSet, seed: u64, trials: u64, err: &mut dyn Write) -> Result<String, Failure> {
    let mut out = String::new();
    writeln!(out, "parameters: {p}").unwrap();
    writeln!(out, "public key flow (seed, B): {} bytes", public_key_bytes(p)).unwrap();
    writeln!(out, "ciphertext flow (U, C): {} bytes", bandwidth_bytes(p)).unwrap();
    if trials == 0 {
        writeln!(out, "trials: 0").unwrap();
        return Ok(out);
    }
    let kem = Kem::new(p.clone())?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let start = Instant::now();
    let mut agreements = 0u64;
    for _ in 0..trials {
        let kp = kem.keygen(&mut rng);
        let (ct, key) = kem.encaps(&kp.public, &mut rng)?;
        let bytes = ct.to_bytes(p);
        debug_assert_eq!(bytes.len(), bandwidth_bytes(p));
        if kem.decaps(&kp.secret, &ct)? == key {
            agreements += 1;
        }
    }
    writeln!(out, "agreements: {agreements}/{trials}").unwrap();
    let _ = writeln!(err, "wall time: {:.3} s", start.elapsed().as_secs_f64());
    Ok(out)
}

fn analyze(p: &ParamSet, a: &AnalysisArgs) -> Result<String, Failure> {
    let opts = a.options();
    let chi = ChiTable::build(p.sigma())?;
    let pe = pe_bound(p, &opts)?;
    let cubic = cubic_pe_bound(p, &opts)?;
    let div = ChiDivergence::new(&chi)?;
    let (q_ro, adv_cpa) = (2f64.powi(64), 2f64.powi(-(p.ell() as i32)));
    let pe_f = pe.total.to_f64();
    let objective = |alpha: f64| {
        div.at(alpha)
            .ok()
            .and_then(|d| cca_advantage_bound(q_ro, p.ell() as u32, pe_f, adv_cpa, p.n(), d, alpha).ok())
            .unwrap_or(f64::INFINITY)
    };
    let (alpha, cca) = optimize_alpha(objective);
    let d_alpha = div.at(alpha)?;

    let mut out = String::new();
    if a.csv {
        writeln!(out, "name,n,log2_q,sigma,ell,beta,log2_term_pairs,log2_term_octets,log2_pe,log2_pe_cubic,bandwidth_bytes,alpha,renyi,log2_cca").unwrap();
        writeln!(
            out,
            "{},{},{},{},{},{},{:.2},{:.2},{:.2},{:.2},{},{:.4},{:.6e},{:.2}",
            p.name(),
            p.n(),
            p.log_q(),
            p.sigma(),
            p.ell(),
            pe.beta,
            pe.term_pairs.log2(),
            pe.term_octets.log2(),
            pe.log2(),
            cubic.log2(),
            bandwidth_bytes(p),
            alpha,
            d_alpha,
            cca.log2()
        )
        .unwrap();
        return Ok(out);
    }
    writeln!(out, "parameters: {p}").unwrap();
    writeln!(out, "chi support: [-{0}, {0}]", chi.s()).unwrap();
    writeln!(out, "beta: {}", pe.beta).unwrap();
    writeln!(out, "term 8*112*P(E00+E11 >= beta): 2^{:.2}", pe.term_pairs.log2()).unwrap();
    writeln!(out, "term 8*128*P(E00+...+E77 >= 2beta): 2^{:.2}", pe.term_octets.log2()).unwrap();
    writeln!(out, "log2 pe bound (E8 decoder): {:.2}", pe.log2()).unwrap();
    writeln!(out, "log2 pe bound (per-entry decoder): {:.2}", cubic.log2()).unwrap();
    writeln!(out, "grid cells: {}, chi' support: {} points, step {}", pe.grid_cells, pe.support, pe.step).unwrap();
    writeln!(out, "bandwidth (U, C): {} bytes", bandwidth_bytes(p)).unwrap();
    writeln!(out, "renyi divergence D_alpha(chi || rounded gaussian): {d_alpha:.6e} at alpha = {alpha:.4}").unwrap();
    writeln!(out, "log2 cca advantage bound (q_ro = 2^64, adv_cpa = 2^-{}): {:.2}", p.ell(), cca.log2()).unwrap();
    Ok(out)
}

fn table2(a: &AnalysisArgs) -> Result<String, Failure> {
    let opts = a.options();
    let mut out = String::new();
    if a.csv {
        writeln!(out, "name,n,log2_q,sigma,encoder,bandwidth_bytes,published_bandwidth_bytes,log2_pe,published_log2_pe,published_security_bits").unwrap();
    } else {
        writeln!(
            out,
            "{:<18} {:>5} {:>5} {:>5} {:>8} {:>9} {:>9} {:>8} {:>8} {:>8}",
            "set", "n", "q", "sigma", "encoder", "bytes", "pub bytes", "log2 Pe", "pub Pe", "pub sec"
        )
        .unwrap();
    }
    for p in ParamSet::all_named() {
        let row = published(p.name()).expect("every built-in set has a published row");
        let (encoder, pe) = match p.encoder() {
            Encoder::Cubic => ("cubic", cubic_pe_bound(&p, &opts)?),
            Encoder::Gosset => ("e8", pe_bound(&p, &opts)?.total),
        };
        if a.csv {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{:.2},{},{}",
                p.name(),
                p.n(),
                p.log_q(),
                p.sigma(),
                encoder,
                bandwidth_bytes(&p),
                row.bandwidth_bytes,
                pe.log2(),
                row.pe_log2,
                row.security_bits
            )
            .unwrap();
        } else {
            writeln!(
                out,
                "{:<18} {:>5} {:>5} {:>5} {:>8} {:>9} {:>9} {:>8.2} {:>8} {:>8}",
                p.name(),
                p.n(),
                format!("2^{}", p.log_q()),
                p.sigma(),
                encoder,
                bandwidth_bytes(&p),
                row.bandwidth_bytes,
                pe.log2(),
                row.pe_log2,
                row.security_bits
            )
            .unwrap();
        }
    }
    Ok(out)
}

fn chi_table(sigma: f64, out: Option<&std::path::Path>) -> Result<String, Failure> {
    let text = ChiTable::build(sigma)?.to_text();
    match out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Demo { params, seed, trials } => resolve(params).and_then(|p| demo(&p, *seed, *trials, err)),
        Command::Analyze { params, analysis } => resolve(params).and_then(|p| analyze(&p, analysis)),
        Command::Table2 { analysis } => table2(analysis),
        Command::ChiTable { sigma, out } => chi_table(*sigma, out.as_deref()),
    };
    match result {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Limit(msg)) = &f;
            let _ = writeln!(err, "error: {msg}");
            f.code()
        }
    }
}

fn main() -> ExitCode {
    let code = run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}
