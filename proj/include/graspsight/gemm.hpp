#pragma once

namespace gs::tensornet {

// C[M,N] (+)= A[M,K] * B[K,N]; row-major, contiguous, no aliasing.
// The reduction over K runs in ascending order for every output element,
// so results are identical regardless of internal blocking or worker count.
void gemm(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate);
void gemm(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate);

void transpose(int rows, int cols, const float* src, float* dst);
void transpose(int rows, int cols, const double* src, double* dst);

}  // namespace gs::tensornet
