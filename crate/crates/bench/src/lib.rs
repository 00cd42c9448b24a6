//! Synthetic inputs for the pipeline benchmarks.

use arctax_core::TaskResult;

const SNIPPETS: [&str; 10] = [
    "    go = paint(go, box(obj))",
    "    go = fill(go, c, ixs)",
    "    go = hconcat(gi, gi)",
    "    go = hmirror(gi)",
    "    go = upscale(gi, 2)",
    "    x = set(a) & set(b)",
    "    line = connect(a, b)",
    "    go = recolor(2, obj)",
    "    obj = asobject(gi)",
    "    h = randint(1, 9)",
];

/// A generator file with `n` functions of about 30 lines each.
pub fn synthetic_corpus(n: usize) -> String {
    let mut out = String::from("from dsl import *\n\n");
    for k in 0..n {
        out.push_str(&format!("def generate_{k:08x}(diff_lb: float, diff_ub: float) -> dict:\n"));
        out.push_str("    # setup\n    gi = canvas(0, (h, w))\n");
        for j in 0..25 {
            out.push_str(SNIPPETS[(k * 7 + j * 3) % SNIPPETS.len()]);
            out.push('\n');
        }
        out.push_str("    return {'input': gi, 'output': go}\n\n");
    }
    out
}

/// Deterministic pseudo-random results for `n` tasks.
pub fn synthetic_results(n: u32) -> Vec<TaskResult> {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut next = move || {
        // xorshift64
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|k| TaskResult::new(format!("{k:08x}").parse().expect("hex id"), next(), next() * 0.3))
        .collect()
}
