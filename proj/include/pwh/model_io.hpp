#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "pwh/network.hpp"

namespace pwh {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line, int column);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

ReactionNetwork parse_model(std::istream& in);
ReactionNetwork parse_model_string(const std::string& text);
ReactionNetwork load_model(const std::string& path);

// `header` lines are written as comments at the top.
void write_model(std::ostream& out, const ReactionNetwork& net, const std::string& header = {});
void save_model(const std::string& path, const ReactionNetwork& net, const std::string& header = {});

// Lines of the form `name = value`; unknown names are an error.
void apply_parameter_file(ReactionNetwork& net, const std::string& path);
void write_parameters(std::ostream& out, const ReactionNetwork& net);

std::string format_double(double v);
std::string affine_to_string(const ReactionNetwork& net, const AffineExpr& e);
std::string monomial_to_string(const ReactionNetwork& net, const Monomial& m);

}  // namespace pwh
