#include "graspsight/gemm.hpp"

#include <cstring>
#include <vector>

#include "graspsight/parallel.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace gs::tensornet {

namespace {

#if defined(__AVX512F__)

// 6x64 register tile: 24 accumulators + 4 B vectors stays inside the 32
// zmm budget. K is the serial inner loop.
template <int MR>
void kernel_mx64(int K, const float* A, int lda, const float* B, int ldb, float* C, int ldc,
                 bool acc) {
  __m512 c[MR][4];
  for (int r = 0; r < MR; ++r)
    for (int j = 0; j < 4; ++j)
      c[r][j] = acc ? _mm512_loadu_ps(C + r * ldc + 16 * j) : _mm512_setzero_ps();
  for (int k = 0; k < K; ++k) {
    const float* brow = B + int64_t(k) * ldb;
    __m512 b0 = _mm512_loadu_ps(brow);
    __m512 b1 = _mm512_loadu_ps(brow + 16);
    __m512 b2 = _mm512_loadu_ps(brow + 32);
    __m512 b3 = _mm512_loadu_ps(brow + 48);
    for (int r = 0; r < MR; ++r) {
      __m512 a = _mm512_set1_ps(A[r * lda + k]);
      c[r][0] = _mm512_fmadd_ps(a, b0, c[r][0]);
      c[r][1] = _mm512_fmadd_ps(a, b1, c[r][1]);
      c[r][2] = _mm512_fmadd_ps(a, b2, c[r][2]);
      c[r][3] = _mm512_fmadd_ps(a, b3, c[r][3]);
    }
  }
  for (int r = 0; r < MR; ++r)
    for (int j = 0; j < 4; ++j) _mm512_storeu_ps(C + r * ldc + 16 * j, c[r][j]);
}

template <int MR>
void kernel_mx16_masked(int K, const float* A, int lda, const float* B, int ldb, float* C,
                        int ldc, int n, bool acc) {
  __mmask16 m = __mmask16((1u << n) - 1u);
  __m512 c[MR];
  for (int r = 0; r < MR; ++r)
    c[r] = acc ? _mm512_maskz_loadu_ps(m, C + r * ldc) : _mm512_setzero_ps();
  for (int k = 0; k < K; ++k) {
    __m512 b = _mm512_maskz_loadu_ps(m, B + int64_t(k) * ldb);
    for (int r = 0; r < MR; ++r)
      c[r] = _mm512_fmadd_ps(_mm512_set1_ps(A[r * lda + k]), b, c[r]);
  }
  for (int r = 0; r < MR; ++r) _mm512_mask_storeu_ps(C + r * ldc, m, c[r]);
}

template <int MR>
void rows_block(int N, int K, const float* A, int lda, const float* B, int ldb, float* C,
                int ldc, bool acc) {
  int n = 0;
  for (; n + 64 <= N; n += 64) kernel_mx64<MR>(K, A, lda, B + n, ldb, C + n, ldc, acc);
  for (; n < N; n += 16)
    kernel_mx16_masked<MR>(K, A, lda, B + n, ldb, C + n, ldc, N - n < 16 ? N - n : 16, acc);
}

// N-blocked, with the B panel packed contiguous. Packing keeps the panel in
// L2 and avoids L1 set aliasing when N is a multiple of 1024 (4KB row
// stride maps every row to the same set).
void gemm_rows(int m0, int m1, int N, int K, const float* A, const float* B, float* C,
               bool acc) {
  constexpr int NB = 256;
  // 4KB-multiple row strides alias into a single L1 set; only then is the
  // packing copy worth its bandwidth.
  const bool pack = (int64_t(N) * int64_t(sizeof(float))) % 4096 == 0;
  thread_local std::vector<float> packed;
  if (pack) packed.resize(size_t(K) * NB);
  for (int n0 = 0; n0 < N; n0 += NB) {
    int nb = N - n0 < NB ? N - n0 : NB;
    if (pack)
      for (int k = 0; k < K; ++k)
        std::memcpy(packed.data() + int64_t(k) * nb, B + int64_t(k) * N + n0,
                    sizeof(float) * size_t(nb));
    const float* Bp = pack ? packed.data() : B + n0;
    const int ldb = pack ? nb : N;
    int m = m0;
    for (; m + 6 <= m1; m += 6)
      rows_block<6>(nb, K, A + int64_t(m) * K, K, Bp, ldb, C + int64_t(m) * N + n0, N, acc);
    switch (m1 - m) {
      case 5: rows_block<5>(nb, K, A + int64_t(m) * K, K, Bp, ldb, C + int64_t(m) * N + n0, N, acc); break;
      case 4: rows_block<4>(nb, K, A + int64_t(m) * K, K, Bp, ldb, C + int64_t(m) * N + n0, N, acc); break;
      case 3: rows_block<3>(nb, K, A + int64_t(m) * K, K, Bp, ldb, C + int64_t(m) * N + n0, N, acc); break;
      case 2: rows_block<2>(nb, K, A + int64_t(m) * K, K, Bp, ldb, C + int64_t(m) * N + n0, N, acc); break;
      case 1: rows_block<1>(nb, K, A + int64_t(m) * K, K, Bp, ldb, C + int64_t(m) * N + n0, N, acc); break;
      default: break;
    }
  }
}

#else  // portable fallback

void gemm_rows(int m0, int m1, int N, int K, const float* A, const float* B, float* C,
               bool acc) {
  constexpr int NB = 256;
  for (int n0 = 0; n0 < N; n0 += NB) {
    int nb = N - n0 < NB ? N - n0 : NB;
    for (int m = m0; m < m1; ++m) {
      float* crow = C + int64_t(m) * N + n0;
      float tmp[NB];
      if (acc)
        std::memcpy(tmp, crow, sizeof(float) * size_t(nb));
      else
        std::memset(tmp, 0, sizeof(float) * size_t(nb));
      const float* arow = A + int64_t(m) * K;
      for (int k = 0; k < K; ++k) {
        float a = arow[k];
        const float* brow = B + int64_t(k) * N + n0;
        for (int j = 0; j < nb; ++j) tmp[j] += a * brow[j];
      }
      std::memcpy(crow, tmp, sizeof(float) * size_t(nb));
    }
  }
}

#endif

}  // namespace

void gemm(int M, int N, int K, const float* A, const float* B, float* C, bool accumulate) {
  if (M <= 0 || N <= 0) return;
  if (K <= 0) {
    if (!accumulate) std::memset(C, 0, sizeof(float) * size_t(M) * size_t(N));
    return;
  }
  if (int64_t(M) * N * K < 64 * 64 * 64) {
    gemm_rows(0, M, N, K, A, B, C, accumulate);
    return;
  }
  parallel_for(M, [&](int64_t b, int64_t e) {
    gemm_rows(int(b), int(e), N, K, A, B, C, accumulate);
  });
}

void gemm(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
  // Double precision exists for gradient checking; plain loops are enough.
  for (int m = 0; m < M; ++m) {
    double* crow = C + int64_t(m) * N;
    if (!accumulate)
      for (int j = 0; j < N; ++j) crow[j] = 0.0;
    const double* arow = A + int64_t(m) * K;
    for (int k = 0; k < K; ++k) {
      double a = arow[k];
      const double* brow = B + int64_t(k) * N;
      for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
    }
  }
}

template <typename T>
static void transpose_impl(int rows, int cols, const T* src, T* dst) {
  constexpr int TB = 32;
  for (int r0 = 0; r0 < rows; r0 += TB)
    for (int c0 = 0; c0 < cols; c0 += TB) {
      int r1 = rows < r0 + TB ? rows : r0 + TB;
      int c1 = cols < c0 + TB ? cols : c0 + TB;
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) dst[int64_t(c) * rows + r] = src[int64_t(r) * cols + c];
    }
}

void transpose(int rows, int cols, const float* src, float* dst) {
  transpose_impl(rows, cols, src, dst);
}
void transpose(int rows, int cols, const double* src, double* dst) {
  transpose_impl(rows, cols, src, dst);
}

}  // namespace gs::tensornet
