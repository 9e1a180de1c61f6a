use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcnn::datapipe::{read_sequence, synth_generate, write_sequence, FrameSequence, SynthSpec};
use rcnn::network::{checkpoint, Network, NetworkConfig};
use rcnn::Error;

fn small_sequence() -> FrameSequence {
    synth_generate(&SynthSpec {
        width: 8,
        n_subjects: 1,
        sequences_per_subject: 1,
        frames_per_sequence: 30,
        blink_max: 2,
        closure_min: 5,
        ..SynthSpec::default()
    })
    .unwrap()
    .remove(0)
}

#[test]
fn sequence_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_sequence();
    let path = dir.path().join("s.rclseq");
    write_sequence(&seq, &path).unwrap();
    assert_eq!(read_sequence(&path).unwrap(), seq);
}

#[test]
fn sequence_truncations_are_format_errors() {
    let bytes = small_sequence().encode();
    for len in 0..bytes.len() {
        match FrameSequence::decode(&bytes[..len]) {
            Err(Error::Format { .. }) => {}
            other => panic!("truncation to {len} bytes: {other:?}"),
        }
    }
}

#[test]
fn sequence_bit_flips_never_panic() {
    let bytes = small_sequence().encode();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let mut b = bytes.clone();
        let pos = rng.gen_range(0..b.len());
        b[pos] ^= 1 << rng.gen_range(0..8);
        let result = FrameSequence::decode(&b);
        // Everything in the header except the subject id is checked.
        if pos < 8 || (12..24).contains(&pos) {
            assert!(matches!(result, Err(Error::Format { .. })), "flip at {pos}: {result:?}");
        } else {
            assert!(matches!(result, Ok(_) | Err(Error::Format { .. })));
        }
    }
}

#[test]
fn checkpoint_fuzz() {
    let net = Network::<f32>::new(NetworkConfig::reduced(16, 4, 2, 1, 1), 1).unwrap();
    let bytes = checkpoint::encode(&net).unwrap();
    let back = checkpoint::decode(&bytes).unwrap();
    assert_eq!(back.state_tensors(), net.state_tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1000 {
        let len = rng.gen_range(0..bytes.len());
        assert!(matches!(checkpoint::decode(&bytes[..len]), Err(Error::Format { .. })));
        let mut b = bytes.clone();
        let pos = rng.gen_range(0..b.len());
        b[pos] ^= 1 << rng.gen_range(0..8);
        assert!(matches!(checkpoint::decode(&b), Err(Error::Format { .. })), "flip at {pos}");
    }
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let net = Network::<f32>::new(NetworkConfig::reduced(32, 8, 4, 2, 2), 2).unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&net, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back.config(), net.config());
    assert_eq!(back.state_tensors(), net.state_tensors());
    assert!(matches!(checkpoint::load(dir.path().join("missing")), Err(Error::Io { .. })));
}
