//! Maps loudness values onto a DMX channel and frames them as ArtDMX.

use improv_core::netio::{artnet_packet, dmx_map, Curve, DmxEntry, FeatureSelector};

fn main() {
    let e = DmxEntry {
        source: "performer".into(),
        feature: FeatureSelector::Loudness,
        channel: 1,
        range: [-120.0, 0.0],
        curve: Curve::Linear,
    };
    for db in [-140.0, -120.0, -90.0, -60.0, -30.0, -6.0, 0.0] {
        println!("{db:7.1} dB -> {:3}", dmx_map(db, &e));
    }
    let levels = [dmx_map(-60.0, &e), dmx_map(-20.0, &e), 255];
    let p = artnet_packet(1, 0, &levels).unwrap();
    let hex: Vec<String> = p.iter().map(|b| format!("{b:02x}")).collect();
    println!("ArtDMX ({} bytes): {}", p.len(), hex.join(" "));
}
