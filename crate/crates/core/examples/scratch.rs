use detach_core::exact;

fn main() {
    // Criterion 4 probe: e(n, floor(k(n,y))) vs exp(-y)/8.
    for y in [0.0f64, 1.0] {
        for n in [1000u64, 10_000, 30_000] {
            let w = exact::critical_window(n, y).unwrap();
            let k = w.time.floor() as u64;
            let t0 = std::time::Instant::now();
            let e = exact::expected_detachment_states(n, k);
            println!(
                "y={y} n={n} k={k} e={e:.6} limit={:.6} abs_err={:.6} rel={:.3} ({:?})",
                w.limit,
                (e - w.limit).abs(),
                e / w.limit,
                t0.elapsed()
            );
        }
    }
    // Criterion 10 probe: e(n, ceil(n^1.9)) / k.
    for n in [100u64, 200, 400, 800] {
        let k = ((n as f64).powf(1.9)).ceil() as u64;
        let e = exact::expected_detachment_states(n, k);
        println!("n={n} k={k} e/k = {:.6e}", e / k as f64);
    }
    // Criterion 6 sanity at small scale comes later (simulation).
    // Criterion 2 tail probe:
    for n in [2u64, 5, 10] {
        let k = 1_000_000u64;
        let tail = 1.0 - exact::permanent_detachment_cdf(n, k);
        let ratio = k as f64 * tail / (n * (n - 1)) as f64;
        println!("tau tail n={n}: ratio = {ratio:.6}");
    }
}
