use macpilot_gateway::*;
use macpilot_sim::Frame;
use proptest::prelude::*;

fn frame(w: u32, h: u32, fill: u8) -> Frame {
    let px = (w * h) as usize;
    Frame {
        width: w,
        height: h,
        rgb: (0..3 * px).map(|i| (i as u8).wrapping_mul(fill)).collect(),
        depth: (0..px).map(|i| (i % 13) as f32).collect(),
        frame_index: 0,
        timestamp: 0.0,
    }
}

#[test]
fn frame_message_layout() {
    let f = frame(160, 120, 7);
    let bytes = encode_frame_message(258, &f, 12.0, true, 80).unwrap();
    assert_eq!(&bytes[..8], &[2, 1, 0, 0, 160, 0, 120, 0]);
    assert_eq!(&bytes[bytes.len() - 4..], DEPTH_TRAILER);
    let m = decode_frame_message(&bytes).unwrap();
    assert_eq!((m.seq, m.width, m.height), (258, 160, 120));
    let img = image::load_from_memory_with_format(&m.jpeg, image::ImageFormat::Jpeg).unwrap();
    assert_eq!((img.width(), img.height()), (160, 120));
    let depth = m.depth.unwrap();
    assert_eq!(depth.len(), 160 * 120);
    assert_eq!(depth[0], 0);
    assert_eq!(depth[12], 255);
    assert_eq!(depth[6], 128);

    let plain = decode_frame_message(&encode_frame_message(3, &f, 12.0, false, 80).unwrap()).unwrap();
    assert_eq!(plain.depth, None);
    assert_eq!(plain.jpeg, m.jpeg);
}

#[test]
fn depth_quantization_saturates() {
    assert_eq!(quantize_depth(&[-1.0, 0.0, 6.0, 12.0, 40.0], 12.0), [0, 0, 128, 255, 255]);
}

#[test]
fn malformed_frames_are_rejected() {
    assert!(decode_frame_message(&[1, 2, 3]).is_err());
    assert!(decode_frame_message(&[0; 20]).is_err());
    let mut short = encode_frame_message(1, &frame(4, 4, 1), 1.0, false, 80).unwrap();
    short.extend_from_slice(DEPTH_TRAILER);
    let bytes = [&[0u8, 0, 0, 0, 255, 255, 255, 255][..], &short[8..]].concat();
    assert!(decode_frame_message(&bytes).is_err());
}

#[test]
fn messages_are_tagged_json() {
    let m: ClientMessage =
        serde_json::from_str(r#"{"type":"control","seq":4,"steering":-0.5,"throttle":0.25}"#).unwrap();
    assert_eq!(
        m,
        ClientMessage::Control {
            seq: Some(4),
            steering: -0.5,
            throttle: 0.25
        }
    );
    let m: ClientMessage = serde_json::from_str(r#"{"type":"set_mode","mode":"teleop"}"#).unwrap();
    assert_eq!(m.kind(), "set_mode");
    let nack = ServerMessage::Nack {
        seq: Some(2),
        request: Some("start_recording".into()),
        reason: "already recording".into(),
    };
    let v: serde_json::Value = serde_json::from_str(&nack.to_json()).unwrap();
    assert_eq!(v["type"], "nack");
    assert_eq!(v["reason"], "already recording");
}

proptest! {
    #[test]
    fn frame_round_trip(seq in any::<u32>(), w in 1u32..40, h in 1u32..30, fill in any::<u8>(), depth in any::<bool>()) {
        let f = frame(w, h, fill);
        let bytes = encode_frame_message(seq as u64, &f, 12.0, depth, 75).unwrap();
        let m = decode_frame_message(&bytes).unwrap();
        prop_assert_eq!(m.seq, seq);
        prop_assert_eq!((m.width as u32, m.height as u32), (w, h));
        prop_assert_eq!(m.depth, depth.then(|| quantize_depth(&f.depth, 12.0)));
        let img = image::load_from_memory_with_format(&m.jpeg, image::ImageFormat::Jpeg).unwrap();
        prop_assert_eq!((img.width(), img.height()), (w, h));
    }
}
