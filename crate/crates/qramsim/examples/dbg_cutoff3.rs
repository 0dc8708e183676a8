use qramsim::gue::{transfer_channel, GueChain, PulsePair};
use qramsim::linalg::OdeOptions;
use qramsim::noise::{preset, Preset};
use std::time::Instant;

fn main() {
    let params = preset(Preset::PS2);
    let chain = GueChain::symmetric(3, params.gamma());
    let pulse = PulsePair::from_params(&params);
    let opts = OdeOptions { rtol: 3e-7, atol: 1e-9, ..Default::default() };
    for cutoff in [2u32, 3] {
        let t0 = Instant::now();
        let ch = transfer_channel(&chain, &pulse, &params, cutoff, &opts).unwrap();
        let sr = ch.single_rail_average();
        println!("cutoff {cutoff}: 1-F_st = {:.6e}  [{:.0?}]", 1.0 - sr.f_st, t0.elapsed());
    }
}
