//! Free-space link budget used by the UAV scenario.
//!
//! ```bash
//! cargo run --example friis_link_budget
//! ```

use twinforge::env::{dbm_per_hz_to_watts, friis_rate, LinkBudget};

fn main() -> twinforge::Result<()> {
    let lb = LinkBudget::default();
    println!(
        "tx {} W, noise {:.3e} W/Hz ({} dBm/Hz), bandwidth {} Hz, wavelength {} m",
        lb.tx_power,
        lb.noise_psd,
        10.0 * (lb.noise_psd * 1e3).log10(),
        lb.bandwidth,
        lb.carrier_wavelength
    );
    println!("-174 dBm/Hz = {:.4e} W/Hz", dbm_per_hz_to_watts(-174.0));

    println!("{:>8} {:>14} {:>10} {:>14}", "d [m]", "P_rx [W]", "SNR [dB]", "rate [bit/s]");
    for d in [5.0, 10.0, 20.0, 40.0, 80.0, 160.0] {
        let p = lb.received_power(d);
        let snr_db = 10.0 * (p / lb.noise_power()).log10();
        println!("{d:>8.1} {p:>14.4e} {snr_db:>10.2} {:>14.4e}", friis_rate(d, &lb)?);
    }

    // doubling distance costs 6 dB, roughly 2 bits/s/Hz at high SNR
    let r1 = friis_rate(10.0, &lb)?;
    let r2 = friis_rate(20.0, &lb)?;
    println!("loss per doubling: {:.3} bit/s/Hz", (r1 - r2) / lb.bandwidth);
    Ok(())
}
