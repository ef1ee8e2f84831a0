mod common;

use common::load_query_fixture;
use steeple::infer::rejection_sample;

#[test]
#[ignore]
fn profile_mixture_attempts() {
    let loaded = load_query_fixture("gaussian-mixture-obs");
    let t = std::time::Instant::now();
    let out = rejection_sample(&loaded.problem, &loaded.env, &loaded.ids, 0, 10_000);
    eprintln!("{:?} {:?}", t.elapsed(), out.err().map(|e| e.to_string()));
}
