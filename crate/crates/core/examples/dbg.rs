use covertsim_core::lti::discretize_zoh;
use covertsim_core::plant::{nominal_plant, PidParams, SmithController};

fn main() {
    let ts = 0.1;
    let mut plant = discretize_zoh(&nominal_plant(), ts).unwrap();
    let mut ctrl = SmithController::nominal(&PidParams::default(), ts).unwrap();
    let mut u_c = 0.0_f64;
    for k in 0..60 {
        let y = plant.peek_output();
        let next = match ctrl.step(0.5, y, u_c) {
            Ok(v) => v,
            Err(e) => { println!("k={k} ctrl err {e}"); break; }
        };
        if plant.step(u_c).is_err() { println!("k={k} plant err"); break; }
        if k % 2 == 0 { println!("k={k:3} y={y:12.5e} u_c={u_c:12.5e} next={next:12.5e}"); }
        u_c = next;
    }
}
