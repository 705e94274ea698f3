//! Regenerates the committed fixture signals:
//! `cargo run -p rcb-cli --example gen_fixtures`

use std::path::Path;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).unwrap();

    // 24 h tracking reference at 3-minute steps for the 100-element fleet
    let reference = rcb::signals::step_reference(480, 0.05, 100);
    rcb::signals::write_signal_kw(&dir.join("tracking_reference.csv"), &reference).unwrap();

    // 24 h two-peak price day at 15-minute steps
    let prices = rcb::signals::two_peak_prices(96, 0.25);
    rcb::signals::write_signal_price(&dir.join("prices_two_peak.csv"), &prices).unwrap();

    println!("fixtures written to {}", dir.display());
}
