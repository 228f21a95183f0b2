//! Encodes a timed bundle of feature messages, sends it over loopback UDP
//! and decodes it on the receiving side.

use std::time::Duration;

use improv_core::netio::{encode, OscArg, OscBundle, OscMessage, OscPacket, OscReceiver, PacketSink, Timetag, UdpSink};

fn main() -> anyhow::Result<()> {
    let rx = OscReceiver::bind("127.0.0.1:0")?;
    let dest = rx.local_addr().to_string();
    let bundle = OscPacket::Bundle(OscBundle {
        timetag: Timetag::from_seconds(1.5),
        elements: vec![
            OscPacket::Message(OscMessage::new("/revival/performer/loudness", vec![OscArg::Float(-23.5)])),
            OscPacket::Message(OscMessage::new("/revival/scene", vec![OscArg::Int(2)])),
        ],
    });
    let bytes = encode(&bundle)?;
    println!("{} bytes: {}", bytes.len(), hex_preview(&bytes));
    let mut sink = UdpSink::new()?;
    sink.send(&dest, &bytes);
    let got = rx.packets().recv_timeout(Duration::from_secs(2))?;
    let packet = got.packet?;
    print!("from {}:\n{}", got.from, packet.pretty());
    assert_eq!(packet, bundle);
    Ok(())
}

fn hex_preview(b: &[u8]) -> String {
    b.iter().take(24).map(|x| format!("{x:02x}")).collect::<Vec<_>>().join(" ") + " .."
}
