//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use e8kem::codec::{e8_decode, e8_encode, f_inv, f_map, KeyBits};
use e8kem::e8_lattice::{cvp_e8, dist_sq_exact, is_e8_halves, relevant_vectors, E8Point, RationalVec8};
use e8kem::failure_analysis::{chi_prime, cubic_pe_bound, pe_bound, tail_sum_two, AnalysisOptions, Pmf};
use e8kem::kex::{bandwidth_bytes, gen_a, Kem};
use e8kem::noise::{build_chi, ChiTable};
use e8kem::params::{published, Encoder, ParamSet};
use e8kem::upfloat::UpFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bandwidth() -> Outcome {
    let expected = [9720, 15744, 21632, 9720, 15744, 21632, 9072, 14760, 20280];
    let got: Vec<usize> = ParamSet::all_named().iter().map(bandwidth_bytes).collect();
    check(got == expected, format!("{got:?}"))
}

fn certification_floor(n: usize) -> f64 {
    match n {
        640 => -128.0,
        976 => -192.0,
        _ => -240.0,
    }
}

fn failure_bound_modified_rows() -> Outcome {
    let opts = AnalysisOptions::default();
    let mut ok = true;
    let mut rows = Vec::new();
    for p in ParamSet::all_named().into_iter().filter(|p| p.encoder() == Encoder::Gosset) {
        let target = published(p.name()).unwrap().pe_log2 as f64;
        let start = Instant::now();
        let pe = pe_bound(&p, &opts).map_err(|e| format!("{}: {e}", p.name()))?;
        let elapsed = start.elapsed();
        let log2 = pe.log2();
        let within = (log2 - target).abs() <= 4.0;
        let certified = log2 <= certification_floor(p.n());
        let fast = elapsed <= Duration::from_secs(3600);
        ok &= within && certified && fast;
        rows.push(format!(
            "{} {:.2} vs {} [{}{}{}] {:.1}s",
            p.name(),
            log2,
            target,
            if within { "ok" } else { "off" },
            if certified { "" } else { ", uncertified" },
            if fast { "" } else { ", slow" },
            elapsed.as_secs_f64()
        ));
    }
    check(ok, rows.join("; "))
}

fn failure_bound_original_rows() -> Outcome {
    let opts = AnalysisOptions::default();
    let mut ok = true;
    let mut rows = Vec::new();
    for p in ParamSet::all_named().into_iter().filter(|p| p.encoder() == Encoder::Cubic) {
        let target = published(p.name()).unwrap().pe_log2 as f64;
        let log2 = cubic_pe_bound(&p, &opts).map_err(|e| format!("{}: {e}", p.name()))?.log2();
        ok &= (log2 - target).abs() <= 3.0;
        rows.push(format!("{} {:.2} vs {}", p.name(), log2, target));
    }
    check(ok, rows.join("; "))
}

const DEN: i64 = 1 << 32;

fn random_point(rng: &mut ChaCha20Rng) -> RationalVec8 {
    RationalVec8::new(std::array::from_fn(|_| rng.gen_range(-4 * DEN..=4 * DEN)), DEN)
}

/// Squared distance to the nearest lattice point, by enumerating every E8
/// point within distance 1 of `x` in each coordinate (the covering radius).
fn brute_force_distance(x: &RationalVec8) -> i128 {
    let ranges: Vec<(i64, i64)> = x
        .numerators()
        .iter()
        .map(|&n| ((2 * (n - DEN)).div_euclid(DEN), (2 * (n + DEN)).div_euclid(DEN)))
        .collect();
    let mut best = i128::MAX;
    for parity in 0..2 {
        let choices: Vec<Vec<i64>> =
            ranges.iter().map(|&(lo, hi)| (lo..=hi).filter(|h| h.rem_euclid(2) == parity).collect()).collect();
        let mut idx = [0usize; 8];
        'outer: loop {
            let h: [i64; 8] = std::array::from_fn(|i| choices[i][idx[i]]);
            if let Some(p) = E8Point::from_halves(h) {
                best = best.min(dist_sq_exact(x, &p));
            }
            for i in 0..8 {
                idx[i] += 1;
                if idx[i] < choices[i].len() {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
    }
    best
}

fn cvp_optimality() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let rv = relevant_vectors();
    let mut violations = 0usize;
    for _ in 0..100_000 {
        let x = random_point(&mut rng);
        let y = cvp_e8(x.clone());
        if !is_e8_halves(y.halves()) {
            violations += 1;
            continue;
        }
        let d = dist_sq_exact(&x, &y);
        violations += rv.iter().filter(|&&v| dist_sq_exact(&x, &(y + v)) < d).count();
    }
    let mut disagreements = 0usize;
    for _ in 0..1000 {
        let x = random_point(&mut rng);
        let y = cvp_e8(x.clone());
        disagreements += (dist_sq_exact(&x, &y) != brute_force_distance(&x)) as usize;
    }
    check(
        rv.len() == 240 && violations == 0 && disagreements == 0,
        format!("{} relevant vectors, {violations} violations in 1e5, {disagreements} oracle disagreements in 1e3", rv.len()),
    )
}

fn codec_bijectivity() -> Outcome {
    let mut leaders = HashSet::new();
    let mut bad = 0usize;
    for v in 0u16..256 {
        let b: [bool; 8] = std::array::from_fn(|i| v >> i & 1 == 1);
        let c = f_map(&b);
        bad += (f_inv(&c).ok() != Some(b)) as usize;
        leaders.insert(c);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(102);
    let mut failures = 0usize;
    for name in ["modified-bw-640", "modified-bw-976", "modified-bw-1344"] {
        let p = ParamSet::by_name(name).unwrap();
        for _ in 0..10_000 {
            let key = KeyBits::random(p.ell(), &mut rng);
            let ok = e8_encode(&key, &p).and_then(|m| e8_decode(&m, &p)).map(|k| k == key).unwrap_or(false);
            failures += !ok as usize;
        }
    }
    check(
        bad == 0 && leaders.len() == 256 && failures == 0,
        format!("{bad} f_map round-trip failures, {} distinct leaders, {failures} key round-trip failures in 3x1e4", leaders.len()),
    )
}

fn end_to_end() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(103);
    let mut ok = true;
    let mut rows = Vec::new();
    for p in ParamSet::all_named() {
        let kem = Kem::new(p.clone()).map_err(|e| e.to_string())?;
        let mut mismatches = 0;
        for _ in 0..1000 {
            let kp = kem.keygen(&mut rng);
            let (ct, key) = kem.encaps(&kp.public, &mut rng).map_err(|e| e.to_string())?;
            mismatches += (kem.decaps(&kp.secret, &ct).map_err(|e| e.to_string())? != key) as usize;
        }
        let degenerate = Kem::with_chi(p.clone(), ChiTable::point_mass());
        let mut zero_noise_mismatches = 0;
        for _ in 0..20 {
            let kp = degenerate.keygen(&mut rng);
            let (ct, key) = degenerate.encaps(&kp.public, &mut rng).map_err(|e| e.to_string())?;
            zero_noise_mismatches += (degenerate.decaps(&kp.secret, &ct).map_err(|e| e.to_string())? != key) as usize;
        }
        ok &= mismatches == 0 && zero_noise_mismatches == 0;
        rows.push(format!("{} {mismatches}/1000 {zero_noise_mismatches}/20", p.name()));
    }
    check(ok, format!("mismatches (honest, zero-noise): {}", rows.join("; ")))
}

fn bound_soundness() -> Outcome {
    let p = ParamSet::new("observable", 640, 1 << 14, 25.0, 128).map_err(|e| e.to_string())?;
    let opts = AnalysisOptions { coarsen: true, max_support: 1 << 15, ..Default::default() };
    let bound = pe_bound(&p, &opts).map_err(|e| e.to_string())?;
    let kem = Kem::new(p.clone()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(104);
    let (runs, per_key) = (100_000u64, 100u64);
    let mut failures = 0u64;
    for _ in 0..runs / per_key {
        let kp = kem.keygen(&mut rng);
        let a = gen_a(&kp.public.seed_a, &p);
        for _ in 0..per_key {
            let (ct, key) = kem.encaps_with_a(&a, &kp.public, &mut rng).map_err(|e| e.to_string())?;
            failures += (kem.decaps(&kp.secret, &ct).map_err(|e| e.to_string())? != key) as u64;
        }
    }
    let rate = failures as f64 / runs as f64;
    let bound_f = bound.total.to_f64();
    check(
        rate <= bound_f,
        format!("empirical {failures}/{runs} = {rate:.5}, bound 2^{:.2} (chi' step {})", bound.log2(), bound.step),
    )
}

fn enumerate_chi_prime(t: &ChiTable, n: usize) -> (i64, Vec<u128>) {
    let s = t.s();
    let vars = 4 * n + 1;
    let lo = -(2 * n as i64) * s * s - s;
    let mut out = vec![0u128; (2 * -lo + 1) as usize];
    let width = (2 * s + 1) as usize;
    let mut idx = vec![0usize; vars];
    loop {
        let vals: Vec<i64> = idx.iter().map(|&k| k as i64 - s).collect();
        let mut sum = vals[vars - 1];
        let mut weight = t.numerator(vals[vars - 1]) as u128;
        for k in 0..2 * n {
            let (x, y) = (vals[2 * k], vals[2 * k + 1]);
            sum += x * y;
            weight *= t.numerator(x) as u128 * t.numerator(y) as u128;
        }
        out[(sum - lo) as usize] += weight;
        let mut pos = 0;
        loop {
            if pos == vars {
                return (lo, out);
            }
            idx[pos] += 1;
            if idx[pos] < width {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn synthetic(rng: &mut ChaCha20Rng, len: usize) -> (i64, Vec<u128>) {
    let mode = rng.gen_range(0..len);
    let mut g = vec![0f64; len];
    g[mode] = 1.0;
    for i in (0..mode).rev() {
        g[i] = g[i + 1] * rng.gen_range(0.9..1.0);
    }
    for i in mode + 1..len {
        g[i] = g[i - 1] * rng.gen_range(0.9..1.0);
    }
    let total: f64 = g.iter().sum();
    (rng.gen_range(-600..100), g.iter().map(|&v| (v / total * 2f64.powi(40)).floor() as u128).collect())
}

fn oracle_equivalence() -> Outcome {
    let opts = AnalysisOptions::default();
    let mut mismatched = 0usize;
    let quarter = ChiTable::from_half_numerators(1.0, 2, &[2, 1]).map_err(|e| e.to_string())?;
    let thirds = ChiTable::from_half_numerators(1.0, 16, &[21846, 21845]).map_err(|e| e.to_string())?;
    // 16-bit numerators over 9 variables overflow u128, so the second table stops at n = 1
    for (t, n) in [(&quarter, 1), (&quarter, 2), (&thirds, 1)] {
        let cp = chi_prime(t, n, &opts).map_err(|e| e.to_string())?;
        let (lo, num) = enumerate_chi_prime(t, n);
        let bits = t.bits() * (4 * n as u32 + 1);
        mismatched += num
            .iter()
            .enumerate()
            .filter(|&(k, &v)| cp.mass_at(lo + k as i64) != UpFloat::from_dyadic(v, bits))
            .count();
        mismatched += (cp.min_value() < lo || cp.max_value() > -lo) as usize;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(105);
    let mut undercut = 0usize;
    for _ in 0..100 {
        let len = rng.gen_range(2..300);
        let (offset, w) = synthetic(&mut rng, len);
        let p = Pmf::from_masses(offset, w.iter().map(|&v| UpFloat::from_dyadic(v, 40)).collect());
        let t = rng.gen_range(2 * offset..=2 * (offset + len as i64 - 1) + 1);
        let mut exact = 0u128;
        for (i, &a) in w.iter().enumerate() {
            for (j, &b) in w.iter().enumerate() {
                if 2 * offset + (i + j) as i64 >= t {
                    exact += a * b;
                }
            }
        }
        let exact = UpFloat::from_dyadic(exact, 80);
        undercut += [1, 64, 4096].iter().filter(|&&cells| tail_sum_two(&p, t, cells) < exact).count();
    }
    check(
        mismatched == 0 && undercut == 0,
        format!("{mismatched} chi' masses differ from enumeration, {undercut} two-fold tails undercut in 100 pmfs"),
    )
}

fn simpson_pmf(sigma: f64, i: i64) -> f64 {
    let steps = 2000;
    let (a, b) = (i as f64 - 0.5, i as f64 + 0.5);
    let h = (b - a) / steps as f64;
    let f = |x: f64| (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut acc = f(a) + f(b);
    for k in 1..steps {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

fn distribution_construction() -> Outcome {
    let mut sigmas: Vec<f64> = ParamSet::all_named().iter().map(|p| p.sigma()).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let mut problems = Vec::new();
    for &sigma in &sigmas {
        let t = build_chi(sigma).map_err(|e| e.to_string())?;
        let total: u64 = t.numerators().iter().map(|&v| v as u64).sum();
        let symmetric = (1..=t.s()).all(|i| t.numerator(i) == t.numerator(-i));
        let unimodal = (1..=t.s()).all(|i| t.numerator(i) <= t.numerator(i - 1));
        let worst = (-t.s() - 2..=t.s() + 2)
            .map(|i| (t.numerator(i) as f64 - 65536.0 * simpson_pmf(sigma, i)).abs())
            .fold(0.0, f64::max);
        if total != 1 << 16 || !symmetric || !unimodal || worst > 2.0 {
            problems.push(format!("sigma {sigma}: total {total}, symmetric {symmetric}, unimodal {unimodal}, max error {worst:.3}"));
        }
    }
    check(problems.is_empty(), if problems.is_empty() { format!("sigma {sigmas:?}") } else { problems.join("; ") })
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("bandwidth exactness", bandwidth),
        ("failure bound, modified rows", failure_bound_modified_rows),
        ("failure bound, original rows", failure_bound_original_rows),
        ("cvp optimality", cvp_optimality),
        ("codec bijectivity", codec_bijectivity),
        ("end-to-end agreement", end_to_end),
        ("bound soundness at sigma 25", bound_soundness),
        ("oracle equivalence", oracle_equivalence),
        ("distribution construction", distribution_construction),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
