import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from url2graph.errors import DataFormatError, SpecError
from url2graph.tokenizer import (ALPHABET_SIZE, CONT, PAD, UNK, SubwordVocab, char_id, encode_chars,
                                 encode_subwords, fragments, train_subword_vocab)

url_text = st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=80)


def vocab_of(*words):
    from url2graph.tokenizer import ALPHABET
    surf = ["[PAD]", "[UNK]"] + list(ALPHABET) + [w for w in words if w not in ALPHABET]
    return SubwordVocab(surf, [0] * len(surf))


def test_alphabet_size_and_ids():
    assert ALPHABET_SIZE == 96
    assert char_id("!") == 2 and char_id("~") == 95
    assert char_id(" ") == UNK and char_id("é") == UNK


def test_g00gle_char_ids():
    seq = encode_chars("g00gle.com")
    assert len(seq) == 10
    assert seq.ids[1] == seq.ids[2] == char_id("0")
    assert seq.ids[1] != char_id("o")


def test_encode_chars_edges():
    assert encode_chars("a b").ids[1] == UNK
    assert encode_chars("").ids == (UNK,)
    assert encode_chars("x" * 300).ids == (char_id("x"),) * 256
    assert encode_chars("abc") == encode_chars("abc")


@given(url_text)
def test_encode_chars_length_and_range(url):
    ids = encode_chars(url).ids
    assert len(ids) == max(1, min(len(url), 256))
    assert all(0 <= i < 96 for i in ids)


def test_fragments_split_on_delimiters():
    assert fragments("h://a.b/c?d=e&f-g_h:i@j~k%l+m#n") == list("habcdefghijklmn")
    assert fragments("a.b") == ["a", "b"]
    assert fragments("//..") == []


def test_encode_subwords_examples():
    v = vocab_of("paypal", "com", "account", "verify")
    assert encode_subwords("a.b", v).surfaces == ("a", "b")
    assert encode_subwords("paypal.com/account/verify", v).surfaces == ("paypal", "com", "account", "verify")
    empty = encode_subwords("", v)
    assert empty.ids == (UNK,) and len(empty) == 1


def test_continuation_pieces_share_ids():
    v = vocab_of("log", "in")
    seq = encode_subwords("login", v)
    assert seq.surfaces == ("log", CONT + "in")
    assert seq.ids == (v.token_to_id["log"], v.token_to_id["in"])


def test_unknown_character_is_unk():
    seq = encode_subwords("aé", vocab_of())
    assert seq.ids[1] == UNK


def test_subword_truncation():
    assert len(encode_subwords("a/" * 200, vocab_of(), max_len=128)) == 128


def test_vocab_learns_login():
    v = train_subword_vocab(["login.php", "login.html"], 200)
    assert "login" in v
    assert encode_subwords("login.php", v).surfaces[0] == "login"


def test_seed_size_means_no_merges():
    v = train_subword_vocab(["login.php", "login.html"], 96)
    assert len(v) == 96
    with pytest.raises(SpecError):
        train_subword_vocab(["x"], 95)


CORPUS = ["http://paypal.com/login", "https://paypa1.xyz/account/verify", "http://news.org/login?id=3",
          "http://paypal.com/account", "https://news.org/help/login.php"] * 3


def test_vocab_deterministic_and_order_insensitive():
    a = train_subword_vocab(CORPUS, 160)
    b = train_subword_vocab(CORPUS, 160)
    c = train_subword_vocab(list(reversed(CORPUS)), 160)
    assert a.dumps() == b.dumps() == c.dumps()


def test_vocab_invariants():
    v = train_subword_vocab(CORPUS, 300, min_freq=2)
    assert v.surface(PAD) == "[PAD]" and v.surface(UNK) == "[UNK]"
    assert sorted(v.token_to_id.values()) == list(range(len(v)))
    assert all(f >= 2 for f in v.freqs[96:])


def test_vocab_file_roundtrip(tmp_path):
    v = train_subword_vocab(CORPUS, 150)
    v.save(tmp_path / "v.tsv")
    lines = (tmp_path / "v.tsv").read_text().splitlines()
    assert lines[0] == "#url2graph-vocab v1"
    assert lines[1].startswith("[PAD]\t0\t") and lines[2].startswith("[UNK]\t1\t")
    assert SubwordVocab.load(tmp_path / "v.tsv") == v


def test_vocab_file_errors(tmp_path):
    p = tmp_path / "v.tsv"
    p.write_text("[PAD]\t0\t0\n")
    with pytest.raises(DataFormatError):
        SubwordVocab.load(p)
    p.write_text("#url2graph-vocab v1\n[PAD]\t0\t0\n[UNK]\t2\t0\n")
    with pytest.raises(DataFormatError):
        SubwordVocab.load(p)


def test_wordpiece_continuation_entries_are_stripped(tmp_path):
    p = tmp_path / "v.tsv"
    p.write_text("#url2graph-vocab v1\n[PAD]\t0\t0\n[UNK]\t1\t0\nlog\t2\t5\n##in\t3\t5\n")
    v = SubwordVocab.load(p)
    assert encode_subwords("login", v).surfaces == ("log", "##in")


_shared = train_subword_vocab(CORPUS, 200)


@settings(max_examples=150)
@given(url_text)
def test_greedy_longest_match(url):
    v = _shared
    seq = encode_subwords(url, v)
    assert len(seq) >= 1 and all(0 <= i < len(v) for i in seq.ids)
    # Walk fragments and check no emitted piece could have been extended.
    pieces = iter(zip(seq.ids, seq.surfaces))
    for frag in fragments(url):
        pos = 0
        while pos < len(frag):
            i, s = next(pieces, (None, None))
            if i is None:
                return  # truncated
            plain = s[len(CONT):] if s.startswith(CONT) else s
            n = 1 if i == UNK else len(plain)
            assert (pos > 0) == s.startswith(CONT) or i == UNK
            for longer in range(n + 1, len(frag) - pos + 1):
                assert frag[pos:pos + longer] not in v.piece_to_id
            pos += n


def test_literal_special_text_is_not_special():
    seq = encode_subwords("http://x.com/[PAD][UNK]", vocab_of())
    assert PAD not in seq.ids and UNK not in seq.ids
