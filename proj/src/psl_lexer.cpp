#include <cctype>

#include "tpf/psl.hpp"

namespace tpf {

std::vector<Token> lex_psl(const std::string& src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto advance = [&](size_t n) {
        for (size_t k = 0; k < n; ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            size_t e = src.find('\n', i);
            if (e == std::string::npos) e = src.size();
            t.kind = Token::Kind::Comment;
            t.text = src.substr(i, e - i);
            if (!t.text.empty() && t.text.back() == '\r') t.text.pop_back();
            advance(e - i);
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t e = i;
            while (e < src.size() && (std::isalnum(static_cast<unsigned char>(src[e])) || src[e] == '_'))
                ++e;
            t.kind = Token::Kind::Ident;
            t.text = src.substr(i, e - i);
            advance(e - i);
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t e = i;
            while (e < src.size() && std::isdigit(static_cast<unsigned char>(src[e]))) ++e;
            t.kind = Token::Kind::Number;
            t.text = src.substr(i, e - i);
            advance(e - i);
        } else if (c == '"') {
            size_t e = src.find('"', i + 1);
            if (e == std::string::npos || src.find('\n', i + 1) < e)
                throw PslError("unterminated string", line, col);
            t.kind = Token::Kind::String;
            t.text = src.substr(i + 1, e - i - 1);
            advance(e - i + 1);
        } else if ((c == '=' || c == '!') && i + 1 < src.size() && src[i + 1] == '=') {
            t.kind = Token::Kind::Punct;
            t.text = src.substr(i, 2);
            advance(2);
        } else if (std::string("{}[]():,=@").find(c) != std::string::npos) {
            t.kind = Token::Kind::Punct;
            t.text = std::string(1, c);
            advance(1);
        } else {
            throw PslError(std::string("unexpected character '") + c + "'", line, col);
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Token::Kind::End;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

}  // namespace tpf
