import numpy as np
import pytest
from PIL import Image

from actiongroup.errors import (
    ConfigurationError,
    DataError,
    DimensionMismatchError,
    FrameReadError,
    MalformedMaskError,
)
from actiongroup.ingest import (
    FrameSequence,
    MaskSequence,
    load_frames,
    load_masks,
    slice_intervals,
    write_frames,
)


def _frames(n=4, h=20, w=24, seed=0):
    return FrameSequence(np.random.default_rng(seed).random((n, h, w)), fps=25.0)


@pytest.mark.parametrize("bits, step", [(8, 255), (16, 65535)])
def test_pgm_round_trip(tmp_path, bits, step):
    seq = _frames()
    write_frames(seq, tmp_path, bits=bits)
    back = load_frames(tmp_path, fps=25.0)
    assert back.pixels.shape == seq.pixels.shape
    # quantization error is at most half a grey level
    assert np.abs(back.pixels - seq.pixels).max() <= 0.5 / step + 1e-12


def test_color_frames_are_channel_means(tmp_path):
    rgb = np.zeros((16, 16, 3), dtype=np.uint8)
    rgb[..., 0] = 255
    for i in range(2):
        Image.fromarray(rgb).save(tmp_path / f"f{i}.png")
    seq = load_frames(tmp_path, fps=10)
    assert np.allclose(seq.pixels, 1 / 3)


def test_temporal_subsample(tmp_path):
    seq = _frames(n=6)
    write_frames(seq, tmp_path)
    sub = load_frames(tmp_path, fps=25, temporal_subsample=2)
    assert sub.frame_count == 3
    assert np.allclose(sub.pixels, load_frames(tmp_path, fps=25).pixels[::2])


def test_load_frames_errors(tmp_path):
    with pytest.raises(FrameReadError, match="missing"):
        load_frames(tmp_path / "missing", fps=10)
    write_frames(_frames(n=2), tmp_path / "one")
    (tmp_path / "one" / "frame_00001.pgm").unlink()
    with pytest.raises(DataError, match="at least 2"):
        load_frames(tmp_path / "one", fps=10)
    write_frames(_frames(n=2, w=24), tmp_path / "mix")
    Image.fromarray(np.zeros((20, 30), np.uint8)).save(tmp_path / "mix" / "frame_00002.pgm")
    with pytest.raises(DimensionMismatchError):
        load_frames(tmp_path / "mix", fps=10)
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "a.pgm").write_bytes(b"junk")
    (bad / "b.pgm").write_bytes(b"junk")
    with pytest.raises(FrameReadError):
        load_frames(bad, fps=10)


def test_frame_sequence_validation():
    with pytest.raises(DataError):
        FrameSequence(np.zeros((1, 20, 20)), 10)
    with pytest.raises(DataError):
        FrameSequence(np.zeros((3, 10, 20)), 10)
    with pytest.raises(DataError):
        FrameSequence(np.full((3, 20, 20), 1.5), 10)


def _csv(path, rows, header="frame,person,x,y,w,h"):
    path.write_text(header + "\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n")
    return path


def test_csv_box_masks(tmp_path):
    p = _csv(tmp_path / "b.csv", [(5, 1, 10, 10, 50, 100), (7, 1, 0, 0, 3, 3)])
    masks = load_masks(p, 2, 10, width=200, height=200)
    assert [m.person_id for m in masks] == [1, 2]
    expect = np.zeros((200, 200), bool)
    expect[10:110, 10:60] = True
    assert np.array_equal(masks[0].frame(5), expect)
    # no row for person 2 at frame 7: empty mask, no error
    assert not masks[1].frame(7).any()
    assert not masks[0].frame(0).any()


def test_csv_clamps_with_warning(tmp_path):
    p = _csv(tmp_path / "b.csv", [(0, 1, -5, 15, 10, 10)])
    with pytest.warns(UserWarning, match="clamped"):
        (m,) = load_masks(p, 1, 1, width=20, height=20)
    assert m.frame(0).sum() == 5 * 5


@pytest.mark.parametrize("rows, header", [
    ([(0, 1, 0, 0, 1, 1)], "frame,who,x,y,w,h"),
    ([(0, 3, 0, 0, 1, 1)], "frame,person,x,y,w,h"),
    ([(9, 1, 0, 0, 1, 1)], "frame,person,x,y,w,h"),
    ([("a", 1, 0, 0, 1, 1)], "frame,person,x,y,w,h"),
])
def test_csv_malformed(tmp_path, rows, header):
    p = _csv(tmp_path / "b.csv", rows, header)
    with pytest.raises(MalformedMaskError):
        load_masks(p, 2, 5, width=20, height=20)


def test_missing_mask_path_names_it(tmp_path):
    with pytest.raises(FrameReadError, match="nowhere"):
        load_masks(tmp_path / "nowhere.csv", 2, 5, width=20, height=20)


def test_label_image_masks(tmp_path):
    for f in range(3):
        lab = np.zeros((16, 18), np.uint8)
        lab[:4, :4] = 1
        lab[10:, 10:] = 2 if f != 1 else 0
        Image.fromarray(lab).save(tmp_path / f"m{f}.png")
    m1, m2 = load_masks(tmp_path, 2, 3)
    assert m1.frame(0).sum() == 16 and m2.frame(0).sum() == 6 * 8
    assert not m2.frame(1).any()
    with pytest.raises(MalformedMaskError):
        load_masks(tmp_path, 1, 3)
    with pytest.raises(DataError):
        load_masks(tmp_path, 2, 4)


def test_mask_window_and_dense():
    boxes = np.array([[0, 0, 2, 2], [1, 1, 3, 3], [0, 0, 0, 5]])
    m = MaskSequence(1, 16, 16, boxes=boxes)
    d = m.dense()
    assert d.shape == (3, 16, 16) and d[1].sum() == 9 and d[2].sum() == 0
    from actiongroup.ingest import Interval

    w = m.window(Interval(1, 2, 0))
    assert np.array_equal(w.dense(), d[1:3])


def test_slice_intervals_tile_a_prefix():
    seq = FrameSequence(np.zeros((77, 16, 16)), fps=25)
    ivs = slice_intervals(seq, 1.0)
    assert [iv.index for iv in ivs] == [0, 1, 2]
    assert all(iv.length == 25 for iv in ivs)
    assert [iv.start_frame for iv in ivs] == [0, 25, 50]
    assert ivs[-1].start_frame + ivs[-1].length <= seq.frame_count


def test_short_interval_is_configuration_error():
    seq = FrameSequence(np.zeros((30, 16, 16)), fps=7)
    with pytest.raises(ConfigurationError):
        slice_intervals(seq, 1.0)
