use ewclab_core::rng::Xoshiro256StarStar;
use ewclab_core::DenseMatrix;
use std::time::Instant;

#[test]
#[ignore]
fn matmul_throughput() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(1);
    let a = DenseMatrix::from_vec(512, 784, (0..512 * 784).map(|_| rng.next_f64()).collect()).unwrap();
    let b = DenseMatrix::from_vec(784, 300, (0..784 * 300).map(|_| rng.next_f64()).collect()).unwrap();
    let start = Instant::now();
    let mut sink = 0.0;
    let iters = 20;
    for _ in 0..iters {
        let c = a.matmul(&b);
        sink += c.data()[0];
    }
    let secs = start.elapsed().as_secs_f64();
    let flops = 2.0 * 512.0 * 784.0 * 300.0 * iters as f64;
    println!("matmul: {:.2} GFLOPS (sink {sink})", flops / secs / 1e9);

    let start = Instant::now();
    for _ in 0..iters {
        let c = a.tr_matmul(&a);
        sink += c.data()[0];
    }
    let secs = start.elapsed().as_secs_f64();
    let flops = 2.0 * 784.0 * 784.0 * 512.0 * iters as f64;
    println!("tr_matmul: {:.2} GFLOPS (sink {sink})", flops / secs / 1e9);

    let start = Instant::now();
    for _ in 0..iters {
        let c = a.matmul_tr(&a);
        sink += c.data()[0];
    }
    let secs = start.elapsed().as_secs_f64();
    let flops = 2.0 * 512.0 * 512.0 * 784.0 * iters as f64;
    println!("matmul_tr: {:.2} GFLOPS (sink {sink})", flops / secs / 1e9);
}
