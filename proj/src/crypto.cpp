#include <spock/crypto.hpp>
#include <spock/error.hpp>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <openssl/bio.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/pem.h>

#include <algorithm>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <sstream>

namespace spock {

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct BioDeleter {
    void operator()(BIO* p) const { BIO_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;
using BioPtr = std::unique_ptr<BIO, BioDeleter>;

constexpr std::size_t ed25519_key_len = 32;
constexpr std::size_t ed25519_sig_len = 64;

constexpr std::string_view b64_alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

[[noreturn]] void crypto_fail(const std::string& what) {
    throw Error(ErrorCode::crypto, what);
}

int openssl_type(SignatureScheme scheme) {
    switch (scheme) {
    case SignatureScheme::ed25519: return EVP_PKEY_ED25519;
    }
    crypto_fail("unsupported signature scheme");
}

PkeyPtr load_public(const PublicKey& key) {
    if (key.bytes.size() != ed25519_key_len) return nullptr;
    return PkeyPtr(EVP_PKEY_new_raw_public_key(openssl_type(key.scheme), nullptr,
                                               key.bytes.data(), key.bytes.size()));
}

PkeyPtr load_private(const PrivateKey& key) {
    if (key.seed().size() != ed25519_key_len) crypto_fail("malformed private key");
    PkeyPtr p(EVP_PKEY_new_raw_private_key(openssl_type(key.scheme()), nullptr,
                                           key.seed().data(), key.seed().size()));
    if (!p) crypto_fail("malformed private key");
    return p;
}

std::string bio_to_string(BIO* bio) {
    char* data = nullptr;
    long len = BIO_get_mem_data(bio, &data);
    return std::string(data, static_cast<std::size_t>(len));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::not_found, "cannot read key file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::pair<SignatureScheme, std::string_view> split_tagged(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::parse, "missing scheme tag");
    auto scheme = scheme_from_tag(text.substr(0, colon));
    if (!scheme) throw Error(ErrorCode::parse, "unknown scheme tag");
    return {*scheme, text.substr(colon + 1)};
}

} // namespace

bool Digest::is_valid_hex(std::string_view hex) {
    return hex.size() == 64 && std::all_of(hex.begin(), hex.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

Digest Digest::from_hex(std::string_view hex) {
    if (!is_valid_hex(hex))
        throw Error(ErrorCode::parse, "not a SHA-256 hex digest: '" + std::string(hex) + "'");
    return Digest(std::string(hex));
}

std::optional<Digest> Digest::try_from_hex(std::string_view hex) {
    if (!is_valid_hex(hex)) return std::nullopt;
    return Digest(std::string(hex));
}

Digest digest(ByteView content) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(content.data(), content.size(), md, &len, EVP_sha256(), nullptr) != 1)
        crypto_fail("sha256 failed");
    static constexpr char hexchars[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(hexchars[md[i] >> 4]);
        hex.push_back(hexchars[md[i] & 0xf]);
    }
    return Digest::from_hex(hex);
}

std::string encode_text(ByteView bytes) {
    if (bytes.empty()) return {};
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                            static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::optional<Bytes> try_decode_text(std::string_view text) {
    if (text.empty()) return Bytes{};
    if (text.size() % 4 != 0) return std::nullopt;
    std::size_t pad = 0;
    if (text.back() == '=') ++pad;
    if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
    for (std::size_t i = 0; i < text.size() - pad; ++i)
        if (b64_alphabet.find(text[i]) == std::string_view::npos) return std::nullopt;

    Bytes out(3 * text.size() / 4);
    int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                            static_cast<int>(text.size()));
    if (n < 0) return std::nullopt;
    out.resize(static_cast<std::size_t>(n) - pad);
    // Reject encodings whose unused trailing bits are set.
    if (encode_text(out) != text) return std::nullopt;
    return out;
}

Bytes decode_text(std::string_view text) {
    auto out = try_decode_text(text);
    if (!out) throw Error(ErrorCode::parse, "invalid base64 text");
    return *out;
}

std::string_view scheme_tag(SignatureScheme scheme) {
    switch (scheme) {
    case SignatureScheme::ed25519: return "ed25519";
    }
    return "unknown";
}

std::optional<SignatureScheme> scheme_from_tag(std::string_view tag) {
    if (tag == "ed25519") return SignatureScheme::ed25519;
    return std::nullopt;
}

std::string PublicKey::to_text() const {
    return std::string(scheme_tag(scheme)) + ":" + encode_text(bytes);
}

PublicKey PublicKey::from_text(std::string_view text) {
    auto [scheme, body] = split_tagged(text);
    PublicKey key{scheme, decode_text(body)};
    if (key.bytes.size() != ed25519_key_len) throw Error(ErrorCode::parse, "bad public key length");
    return key;
}

std::string PublicKey::to_pem() const {
    auto pkey = load_public(*this);
    if (!pkey) crypto_fail("malformed public key");
    BioPtr bio(BIO_new(BIO_s_mem()));
    if (PEM_write_bio_PUBKEY(bio.get(), pkey.get()) != 1) crypto_fail("PEM encode failed");
    return bio_to_string(bio.get());
}

PublicKey PublicKey::from_pem(std::string_view pem) {
    BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
    PkeyPtr pkey(PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr));
    if (!pkey || EVP_PKEY_get_id(pkey.get()) != EVP_PKEY_ED25519)
        throw Error(ErrorCode::parse, "not an ed25519 public key PEM block");
    std::size_t len = ed25519_key_len;
    PublicKey key{SignatureScheme::ed25519, Bytes(len)};
    if (EVP_PKEY_get_raw_public_key(pkey.get(), key.bytes.data(), &len) != 1)
        crypto_fail("cannot extract public key");
    return key;
}

PrivateKey::PrivateKey(SignatureScheme scheme, Bytes seed)
    : scheme_(scheme), seed_(std::move(seed)) {}

PrivateKey::~PrivateKey() {
    if (!seed_.empty()) OPENSSL_cleanse(seed_.data(), seed_.size());
}

PublicKey PrivateKey::public_key() const {
    auto pkey = load_private(*this);
    std::size_t len = ed25519_key_len;
    PublicKey key{scheme_, Bytes(len)};
    if (EVP_PKEY_get_raw_public_key(pkey.get(), key.bytes.data(), &len) != 1)
        crypto_fail("cannot derive public key");
    return key;
}

std::string PrivateKey::to_pem() const {
    auto pkey = load_private(*this);
    BioPtr bio(BIO_new(BIO_s_mem()));
    if (PEM_write_bio_PrivateKey(bio.get(), pkey.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1)
        crypto_fail("PEM encode failed");
    return bio_to_string(bio.get());
}

PrivateKey PrivateKey::from_pem(std::string_view pem) {
    BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
    PkeyPtr pkey(PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr));
    if (!pkey || EVP_PKEY_get_id(pkey.get()) != EVP_PKEY_ED25519)
        crypto_fail("not an ed25519 private key PEM block");
    std::size_t len = ed25519_key_len;
    Bytes seed(len);
    if (EVP_PKEY_get_raw_private_key(pkey.get(), seed.data(), &len) != 1)
        crypto_fail("cannot extract private key");
    return PrivateKey(SignatureScheme::ed25519, std::move(seed));
}

std::string Signature::to_text() const {
    return std::string(scheme_tag(scheme)) + ":" + encode_text(bytes);
}

Signature Signature::from_text(std::string_view text, std::string signer_id) {
    auto [scheme, body] = split_tagged(text);
    return Signature{scheme, decode_text(body), std::move(signer_id)};
}

KeyPair keygen(SignatureScheme scheme) {
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(openssl_type(scheme), nullptr));
    EVP_PKEY* raw = nullptr;
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) != 1 || EVP_PKEY_keygen(ctx.get(), &raw) != 1)
        crypto_fail("key generation failed (entropy source?)");
    PkeyPtr pkey(raw);
    std::size_t len = ed25519_key_len;
    Bytes seed(len);
    if (EVP_PKEY_get_raw_private_key(pkey.get(), seed.data(), &len) != 1)
        crypto_fail("cannot extract generated key");
    PrivateKey priv(scheme, std::move(seed));
    auto pub = priv.public_key();
    return KeyPair{std::move(pub), std::move(priv)};
}

Signature sign(ByteView content, const PrivateKey& key, std::string signer_id) {
    auto pkey = load_private(key);
    MdCtxPtr ctx(EVP_MD_CTX_new());
    std::size_t len = ed25519_sig_len;
    Bytes sig(len);
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1 ||
        EVP_DigestSign(ctx.get(), sig.data(), &len, content.data(), content.size()) != 1)
        crypto_fail("signing failed");
    sig.resize(len);
    return Signature{key.scheme(), std::move(sig), std::move(signer_id)};
}

namespace {

bool verify_uncached(ByteView content, const Signature& sig, const PublicKey& key) {
    auto pkey = load_public(key);
    if (!pkey) return false;
    MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1)
        return false;
    return EVP_DigestVerify(ctx.get(), sig.bytes.data(), sig.bytes.size(), content.data(),
                            content.size()) == 1;
}

// Ledger replays re-verify the same records many times. Results are cached
// under hex(sha256(content)) || signature || public key, so a hit can only occur
// for an identical (content, signature, key) triple.
class VerifyCache {
public:
    std::optional<bool> get(const std::string& k) {
        std::lock_guard lock(mu_);
        auto it = entries_.find(k);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }
    void put(std::string k, bool ok) {
        std::lock_guard lock(mu_);
        if (entries_.size() >= capacity) entries_.clear();
        entries_.emplace(std::move(k), ok);
    }

private:
    static constexpr std::size_t capacity = 1 << 14;
    std::mutex mu_;
    std::unordered_map<std::string, bool> entries_;
};

VerifyCache& verify_cache() {
    static VerifyCache cache;
    return cache;
}

} // namespace

bool verify(ByteView content, const Signature& sig, const PublicKey& key) {
    if (sig.scheme != key.scheme || sig.bytes.size() != ed25519_sig_len) return false;
    std::string k = digest(content).hex();
    k.append(sig.bytes.begin(), sig.bytes.end());
    k.append(key.bytes.begin(), key.bytes.end());
    if (auto hit = verify_cache().get(k)) return *hit;
    bool ok = verify_uncached(content, sig, key);
    verify_cache().put(std::move(k), ok);
    return ok;
}

void write_private_key_file(const std::filesystem::path& path, const PrivateKey& key) {
    auto pem = key.to_pem();
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0600);
    if (fd < 0) throw Error(ErrorCode::io, "cannot create key file " + path.string());
    bool ok = ::write(fd, pem.data(), pem.size()) == static_cast<ssize_t>(pem.size());
    ok = (::fsync(fd) == 0) && ok;
    ::close(fd);
    OPENSSL_cleanse(pem.data(), pem.size());
    if (!ok) throw Error(ErrorCode::io, "cannot write key file " + path.string());
}

PrivateKey read_private_key_file(const std::filesystem::path& path) {
    struct stat st {};
    if (::stat(path.c_str(), &st) != 0)
        throw Error(ErrorCode::not_found, "private key file not found: " + path.string());
    if ((st.st_mode & 077) != 0)
        throw Error(ErrorCode::crypto,
                    "private key file " + path.string() + " is accessible by group/other");
    auto pem = read_file(path);
    auto key = PrivateKey::from_pem(pem);
    OPENSSL_cleanse(pem.data(), pem.size());
    return key;
}

void write_public_key_file(const std::filesystem::path& path, const PublicKey& key) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << key.to_pem();
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
}

PublicKey read_public_key_file(const std::filesystem::path& path) {
    auto text = read_file(path);
    if (text.find("-----BEGIN") != std::string::npos) return PublicKey::from_pem(text);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return PublicKey::from_text(text);
}

} // namespace spock
