//! Temporary tuning probe for the large-scale sampling instance.

use std::time::Instant;

use gridwalk_core::{fix_integral, EngineConfig, Profile, SetSystem, SplitMix64};

fn random_set(rng: &mut SplitMix64, scratch: &mut [u32], size: usize) -> Vec<u32> {
    let n = scratch.len();
    for i in 0..size {
        let j = i + (rng.next_u64() as usize) % (n - i);
        scratch.swap(i, j);
    }
    let mut s = scratch[..size].to_vec();
    s.sort_unstable();
    s
}

fn main() {
    let n = 4096usize;
    let m = 4096usize;
    let size = 512usize;
    let (p, epsilon, k) = (0.125f64, 0.3f64, 64u32);
    let mut rng = SplitMix64::new(0x5E75_A11);
    let mut scratch: Vec<u32> = (0..n as u32).collect();
    let sets: Vec<Vec<u32>> = (0..m)
        .map(|_| random_set(&mut rng, &mut scratch, size))
        .collect();
    let system = SetSystem::new(n, sets).unwrap();
    let matrix = system.membership_matrix().unwrap();
    let probs = vec![p; n];
    let deltas: Vec<f64> = system
        .sets()
        .iter()
        .map(|s| epsilon * p * s.len() as f64)
        .collect();

    let args: Vec<String> = std::env::args().skip(1).collect();
    let scale: f64 = args.first().map(|a| a.parse().unwrap()).unwrap_or(8.0);
    let pair: f64 = args.get(1).map(|a| a.parse().unwrap()).unwrap_or(4.0);
    let budget: f64 = args.get(2).map(|a| a.parse().unwrap()).unwrap_or(1.0);
    let k_eff: u32 = args.get(3).map(|a| a.parse().unwrap()).unwrap_or(k);

    let mut profile = Profile::practical();
    profile.lambda_scale = scale;
    profile.pair_lambda_scale = pair;
    let config = EngineConfig::with_profile(profile);
    let walk_deltas: Vec<f64> = deltas.iter().map(|&d| budget * d).collect();

    let started = Instant::now();
    let res = fix_integral(&matrix, &probs, &walk_deltas, k_eff, &config).unwrap();
    let elapsed = started.elapsed().as_secs_f64();

    let q: Vec<f64> = res.bits.iter().map(|&b| b as f64).collect();
    let devs = matrix.deviations(&probs, &q);
    let mut misses = 0usize;
    let mut worst = 0.0f64;
    for (i, s) in system.sets().iter().enumerate() {
        let count = s.iter().filter(|&&j| res.bits[j as usize] == 1).count();
        let mean = p * s.len() as f64;
        let inside =
            count as f64 >= (1.0 - epsilon) * mean && count as f64 <= (1.0 + epsilon) * mean;
        if !inside {
            misses += 1;
        }
        worst = worst.max(devs[i].abs() / deltas[i]);
    }
    let total_steps: u64 = res.levels.iter().map(|l| l.steps).sum();
    println!(
        "scale={scale} pair={pair} budget={budget} k_eff={k_eff}: misses={misses} \
         worst|dev|/delta={worst:.3} levels={} steps={total_steps} elapsed={elapsed:.1}s",
        res.levels.len()
    );
}
