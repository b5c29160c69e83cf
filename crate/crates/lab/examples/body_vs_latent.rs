//! Compares per-block PAPR of the critical-rate latent waveform with
//! the transmitted 1024-sample body, to quantify interpolation
//! regrowth plus pilot/band-edge contributions.
use coofdm_core::ae;
use coofdm_core::fft;
use coofdm_core::ofdm;
use coofdm_core::papr;
use coofdm_core::signal::{qam16_map, BitSeq};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let path = std::env::args().nth(1).expect("usage: body_vs_latent <weights.aew>");
    let params = ae::load_weights(std::path::Path::new(&path)).unwrap();
    let layout = ofdm::build_layout(&ofdm::LayoutConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut max_lat: f64 = 0.0;
    let mut max_body: f64 = 0.0;
    let mut max_body_nopilot: f64 = 0.0;
    for _ in 0..200 {
        let bits: Vec<u8> = (0..855 * 4).map(|_| rng.gen::<bool>() as u8).collect();
        let x = ae::pack_symbols(&qam16_map(&BitSeq::new(bits)).unwrap().symbols);
        let latent = ae::encoder_forward(&x, &params).unwrap();
        let w = ae::unpack_symbols(&latent.values);
        let mut t = w.clone();
        fft::ifft(&mut t);
        let p_lat = papr::papr_db(&t).unwrap();
        let body = ofdm::ofdm_modulate_body(&w, &layout).unwrap();
        let p_body = papr::papr_db(&body).unwrap();
        let mut l0 = layout.clone();
        l0.pilot_gain = 0.0;
        let body0 = ofdm::ofdm_modulate_body(&w, &l0).unwrap();
        let p_body0 = papr::papr_db(&body0).unwrap();
        max_lat = max_lat.max(p_lat);
        max_body = max_body.max(p_body);
        max_body_nopilot = max_body_nopilot.max(p_body0);
    }
    println!("max latent papr {max_lat:.2} dB, body {max_body:.2} dB, body w/o pilot {max_body_nopilot:.2} dB");
}
