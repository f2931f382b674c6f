//! Middlebury `.flo` and PFM depth files: write, read back, reject corruption.

use flowservo::observation::{read_flo, read_pfm, write_flo, write_pfm, DepthMap, FlowField};

fn main() -> flowservo::Result<()> {
    let mut flow = FlowField::invalid(4, 3);
    flow.set(0, [1.5, -0.25])?;
    flow.set(5, [0.0, 3.0])?;
    let bytes = write_flo(&flow);
    println!(".flo: {} bytes, round trip exact: {}", bytes.len(), read_flo(&bytes)? == flow);

    let mut depth = DepthMap::constant(4, 3, 2.0);
    depth.set(11, 0.0);
    let bytes = write_pfm(&depth);
    println!("PFM header: {:?}", String::from_utf8_lossy(&bytes[..bytes.len() - 48]));
    println!("PFM valid pixels after round trip: {}", read_pfm(&bytes)?.valid_count());

    let mut bad = write_flo(&flow);
    bad[0] ^= 0xff;
    println!("corrupted magic: {}", read_flo(&bad).unwrap_err());
    Ok(())
}
