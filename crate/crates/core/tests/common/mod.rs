use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Small random programs over 8-bit variables with nondet choices in 0..4.
pub fn small_program(rng: &mut ChaCha8Rng) -> String {
    let vars = ["a", "b"];
    let ty = if rng.gen() { "unsigned char" } else { "signed char" };
    let atom = |rng: &mut ChaCha8Rng, allow_d: bool| -> String {
        match rng.gen_range(0..if allow_d { 4 } else { 3 }) {
            0 => rng.gen_range(0..4).to_string(),
            3 => "d".to_string(),
            _ => vars[rng.gen_range(0..2)].to_string(),
        }
    };
    let ops = ["+", "-", "*", "&", "|", "^", "%", "/"];
    let cmps = ["<", "<=", "!=", "==", ">"];
    let nondet = rng.gen_bool(0.6);
    let mut body = String::new();
    if nondet {
        body.push_str("        unsigned char d = nondet_uchar();\n        __VERIFIER_assume(d < 4);\n");
    }
    for _ in 0..rng.gen_range(1..=3) {
        let target = vars[rng.gen_range(0..2)];
        let rhs = format!("{} {} {}", atom(rng, nondet), ops[rng.gen_range(0..ops.len())], atom(rng, nondet));
        if rng.gen_bool(0.4) {
            let c = format!("{} {} {}", atom(rng, nondet), cmps[rng.gen_range(0..cmps.len())], atom(rng, nondet));
            body.push_str(&format!("        if ({c}) {{\n            {target} = {rhs};\n        }}\n"));
        } else {
            body.push_str(&format!("        {target} = {rhs};\n"));
        }
    }
    let cond = format!("{} {} {}", vars[rng.gen_range(0..2)], cmps[rng.gen_range(0..cmps.len())], rng.gen_range(0..6));
    let second = if rng.gen_bool(0.3) { "    while (b != 0) {\n        b = b - 1;\n    }\n" } else { "" };
    format!(
        "int main(void) {{\n    {ty} a = {};\n    {ty} b = {};\n    while ({cond}) {{\n{body}    }}\n{second}    return 0;\n}}\n",
        rng.gen_range(0..4),
        rng.gen_range(0..4)
    )
}
