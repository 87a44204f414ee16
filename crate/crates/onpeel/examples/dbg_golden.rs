fn main() {
    let t = onpeel::model::q_from_golden();
    let s = onpeel::resolvent::critical_density(&t).unwrap();
    println!("h = {}", s.h_val);
    let df = onpeel::resolvent::disk_functions(&s, 1.5, 512);
    println!("model_c = {}", df.model_c);
    let gamma2 = 3.0 * std::f64::consts::PI;
    for k in [1usize, 2, 8, 32, 128, 512] {
        let exact = gamma2.powi(k as i32 + 1) * (2.0/std::f64::consts::PI/((4*(k as i64+1)*(k as i64+1)-1) as f64)) / 2.0;
        println!("F({}) = {:.9e}  exact {:.9e}  rel {:.2e}", k, df.eval(k), exact, (df.eval(k)-exact).abs()/exact);
    }
    // u along r grid for qhat built like fixed_point_check does
    let mut qhat_head = Vec::new();
    for k in 1..=2056usize {
        let loops = t.n * ((2 * k) as f64 * t.g.ln() + df.eval_ln(k)).exp();
        qhat_head.push(t.q_at(k) + loops);
    }
    let qhat = onpeel::model::EffectiveSequence::with_tail(
        qhat_head, t.n * df.model_c, (t.g * df.gamma) * (t.g * df.gamma), 2.0);
    for r in [2.2, 2.3, 2.35, 2.356, 2.3561944, 2.3562, 2.36] {
        println!("u({}) = {:?}", r, onpeel::model::u_hat(r, &qhat));
    }
}
