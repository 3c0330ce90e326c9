#ifndef HSTGNN_MAT_H
#define HSTGNN_MAT_H

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace la {

    // Dense row-major matrix of doubles. Row vectors are 1 x d matrices.
    struct matrix {
        matrix() : rows_(0), cols_(0) {}
        matrix(std::size_t rows, std::size_t cols)
            : rows_(rows), cols_(cols), data_(rows * cols, 0.0)
        {}
        matrix(std::size_t rows, std::size_t cols, double fill)
            : rows_(rows), cols_(cols), data_(rows * cols, fill)
        {}
        matrix(std::initializer_list<std::initializer_list<double>> init)
        {
            rows_ = init.size();
            cols_ = rows_ == 0 ? 0 : init.begin()->size();
            data_.reserve(rows_ * cols_);
            for (auto const& row : init) {
                if (row.size() != cols_) {
                    throw std::invalid_argument("matrix: ragged initializer");
                }
                data_.insert(data_.end(), row.begin(), row.end());
            }
        }

        std::size_t rows() const { return rows_; }
        std::size_t cols() const { return cols_; }
        std::size_t size() const { return data_.size(); }

        double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
        double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

        double* data() { return data_.data(); }
        double const* data() const { return data_.data(); }

        double* row(std::size_t i) { return data_.data() + i * cols_; }
        double const* row(std::size_t i) const { return data_.data() + i * cols_; }

        bool same_shape(matrix const& other) const
        {
            return rows_ == other.rows_ && cols_ == other.cols_;
        }

        void fill(double v) { data_.assign(data_.size(), v); }

        friend bool operator==(matrix const& a, matrix const& b)
        {
            return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
        }

    private:
        std::size_t rows_;
        std::size_t cols_;
        std::vector<double> data_;
    };

    inline std::string shape_str(matrix const& m)
    {
        return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
    }

    inline void check_shape(bool ok, std::string const& what)
    {
        if (!ok) {
            throw std::invalid_argument("shape error: " + what);
        }
    }

}

#endif
