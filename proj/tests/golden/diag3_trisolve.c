/* diag3_trisolve: generated for n=3, nnz=3 */
#include <math.h>

enum { reachSet_len = 1 };
static const int reachSet[1] = {
    2
};


void diag3_trisolve(const double* Lx, const int* Lp, const int* Li, double* x)
{
    (void)Lx; (void)Lp; (void)Li; (void)x;
    for (int jp = 0; jp < 1; ++jp) {
        x[reachSet[jp]] /= Lx[Lp[reachSet[jp]]];
        #pragma GCC ivdep
        for (int p = Lp[reachSet[jp]] + 1; p < Lp[reachSet[jp] + 1]; ++p) {
            x[Li[p]] -= Lx[p] * x[reachSet[jp]];
        }
    }
}
