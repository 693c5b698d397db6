//! Write a network in both file formats, read it back, and evaluate it.

use lipcert::netio::{load_network_any, random_network, save_network, NetFormat, DEFAULT_NORM_RANGE};
use lipcert::spectral::Vector;

fn main() -> lipcert::Result<()> {
    let net = random_network(&[3, 6, 6, 2], 5, DEFAULT_NORM_RANGE)?;
    let dir = std::env::temp_dir().join(format!("lipcert-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    for (name, format) in [("net.json", NetFormat::Json), ("net.ecl", NetFormat::EclBinary)] {
        let path = dir.join(name);
        save_network(&net, &path, format)?;
        let back = load_network_any(&path)?;
        let bytes = std::fs::metadata(&path)?.len();
        println!("{name}: {bytes} bytes, round trip equal: {}", back == net);
    }
    let y = net.forward(&Vector::from_vec(vec![0.5, -1.0, 2.0]));
    println!("f([0.5, -1, 2]) = {:?}", y.as_slice());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
